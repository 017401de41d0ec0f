#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lfbm/core.hpp"

namespace lfbm {

inline constexpr int kFormatVersion = 1;

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

/// Tab-separated "i j s" lines. Lines starting with '#' are comments, except
/// the headers "#n=<N>" (object count) and "#undirected" (each pair is
/// mirrored). Errors carry the offending line number.
RelationData parse_edge_list(std::istream& in);

/// Canonical form: "#n=<N>" header, "#undirected" when applicable, then
/// entries sorted by (i, j). Undirected data is written as its i <= j half.
void write_edge_list(std::ostream& out, const RelationData& data);

/// "i j" per line; extra columns are ignored, so edge lists are accepted too.
std::vector<std::pair<Index, Index>> parse_pairs(std::istream& in);

/// One integer label per line, index-aligned with objects.
std::vector<int> parse_labels(std::istream& in);
void write_labels(std::ostream& out, std::span<const int> labels);

/// "i j f1,f2,...,fm" per line; every line must carry the same m.
SideInfo parse_side_info(std::istream& in);

struct ScoredPair {
  Index i;
  Index j;
  double score;
};

void write_scores(std::ostream& out, std::span<const std::pair<Index, Index>> pairs,
                  std::span<const double> scores);
std::vector<ScoredPair> parse_scores(std::istream& in);

/// Dense matrix as comma-separated rows.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

struct Checkpoint {
  LatentState state;
  FitTrace trace;
};

nlohmann::json checkpoint_to_json(const LatentState& state, const FitTrace& trace);
/// Throws DataError on a missing or different format_version, malformed
/// fields, or arrays whose lengths disagree with n, d, K, m.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const LatentState& state, const FitTrace& trace,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lfbm
