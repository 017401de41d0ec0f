#include "lfbm/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "lfbm/eval.hpp"
#include "lfbm/io.hpp"
#include "lfbm/optim.hpp"
#include "lfbm/synth.hpp"

namespace lfbm {

using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

RelationData read_edges(const std::string& path) {
  auto in = open_in(path);
  try {
    return parse_edge_list(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<int> read_labels(const std::string& path) {
  auto in = open_in(path);
  return parse_labels(in);
}

std::optional<SideInfo> read_side(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto in = open_in(path);
  return parse_side_info(in);
}

void emit_json(const json& doc, const std::string& path, std::ostream& console) {
  if (path.empty()) {
    console << doc.dump(2) << '\n';
    return;
  }
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

json provenance(const std::string& command, json config, json seed) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["command"] = command;
  doc["config"] = std::move(config);
  doc["seed"] = std::move(seed);
  return doc;
}

// Hyperparameter flags shared by `train` and `ablate`.
struct HyperFlags {
  HyperParams hp;
  double lambda_all = 1.0;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* lu = nullptr;
  CLI::Option* lv = nullptr;
  CLI::Option* lc = nullptr;
  CLI::Option* lb = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--d", hp.d, "latent factor dimension")->capture_default_str();
    cmd->add_option("--k", hp.K, "number of clusters")->capture_default_str();
    cmd->add_option("--eta0", hp.eta0, "initial Armijo step")->capture_default_str();
    lambda_opt = cmd->add_option("--lambda", lambda_all, "sets all four regularization weights");
    lu = cmd->add_option("--lambda-u", hp.lambda_u, "sender factor weight");
    lv = cmd->add_option("--lambda-v", hp.lambda_v, "receiver factor weight");
    lc = cmd->add_option("--lambda-c", hp.lambda_c, "block matrix weight");
    lb = cmd->add_option("--lambda-beta", hp.lambda_beta, "covariate weight");
    cmd->add_option("--armijo-shrink", hp.armijo_shrink)->capture_default_str();
    cmd->add_option("--armijo-slope", hp.armijo_slope)->capture_default_str();
    cmd->add_option("--max-sweeps", hp.max_sweeps)->capture_default_str();
    cmd->add_option("--rel-tol", hp.rel_tol)->capture_default_str();
    cmd->add_option("--seed", hp.seed)->capture_default_str();
  }

  HyperParams resolve() const {
    HyperParams out = hp;
    if (lambda_opt->count() > 0) {
      if (lu->count() == 0) out.lambda_u = lambda_all;
      if (lv->count() == 0) out.lambda_v = lambda_all;
      if (lc->count() == 0) out.lambda_c = lambda_all;
      if (lb->count() == 0) out.lambda_beta = lambda_all;
    }
    try {
      out.check();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return out;
  }
};

json hyper_json(const HyperParams& hp) {
  return {{"d", hp.d},
          {"k", hp.K},
          {"eta0", hp.eta0},
          {"lambda_u", hp.lambda_u},
          {"lambda_v", hp.lambda_v},
          {"lambda_c", hp.lambda_c},
          {"lambda_beta", hp.lambda_beta},
          {"armijo_shrink", hp.armijo_shrink},
          {"armijo_slope", hp.armijo_slope},
          {"max_sweeps", hp.max_sweeps},
          {"rel_tol", hp.rel_tol},
          {"seed", hp.seed}};
}

AblationMode mode_from(const std::string& name) {
  try {
    return parse_ablation_mode(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LFBM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(cap, jobs));
}

void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = worker_count(jobs);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto run = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      try {
        body(job);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Eigen::MatrixXd parse_link_prob(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream rs(text);
  std::string row;
  while (std::getline(rs, row, ';')) {
    std::vector<double> values;
    std::stringstream cs(row);
    std::string cell;
    while (std::getline(cs, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw UsageError("malformed --link-prob entry '" + cell + "'");
      }
    }
    rows.push_back(std::move(values));
  }
  const auto K = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd P(K, K);
  for (Eigen::Index r = 0; r < K; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != K) {
      throw UsageError("--link-prob must be a square matrix written as 'a,b;c,d'");
    }
    for (Eigen::Index c = 0; c < K; ++c) P(r, c) = rows[r][c];
  }
  return P;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent factor blockmodel for binary relational data"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");

  std::function<int()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "generate planted-block data");
  std::string preset;
  std::vector<int> sizes;
  std::string link_prob;
  double noise = 0.05;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  std::string synth_labels;
  synth->add_option("--preset", preset, "named setting (paper-3cluster)")
      ->check(CLI::IsMember({"paper-3cluster"}));
  auto* sizes_opt = synth->add_option("--sizes", sizes, "cluster sizes")->delimiter(',');
  auto* link_opt = synth->add_option("--link-prob", link_prob, "K x K matrix 'a,b;c,d'");
  auto* noise_opt = synth->add_option("--noise", noise, "flip probability")->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--out", synth_out, "edge list output")->required();
  synth->add_option("--labels", synth_labels, "planted label output");
  synth->callback([&] {
    action = [&]() -> int {
      BlockSpec spec;
      if (!preset.empty()) {
        if (sizes_opt->count() > 0 || link_opt->count() > 0) {
          throw UsageError("--preset cannot be combined with --sizes/--link-prob");
        }
        spec = BlockSpec::paper_3cluster(synth_seed);
        if (noise_opt->count() > 0) spec.noise = noise;
      } else {
        if (sizes.empty() || link_prob.empty()) {
          throw UsageError("synth needs --preset or both --sizes and --link-prob");
        }
        spec.sizes = sizes;
        spec.link_prob = parse_link_prob(link_prob);
        spec.noise = noise;
        spec.seed = synth_seed;
      }
      try {
        spec.check();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const Generated g = generate(spec);
      auto edges = open_out(synth_out);
      write_edge_list(edges, g.data);
      if (!synth_labels.empty()) {
        auto labels = open_out(synth_labels);
        write_labels(labels, g.labels);
      }
      return kExitOk;
    };
  });

  // split
  auto* split_cmd = app.add_subcommand("split", "hold out a random subset of entries");
  std::string split_in;
  double holdout = 0.1;
  std::uint64_t split_seed = 0;
  std::string split_train;
  std::string split_test;
  split_cmd->add_option("--in", split_in, "edge list")->required();
  split_cmd->add_option("--holdout", holdout, "held-out fraction")->capture_default_str();
  split_cmd->add_option("--seed", split_seed)->capture_default_str();
  split_cmd->add_option("--train", split_train, "training edge list output")->required();
  split_cmd->add_option("--test", split_test, "held-out edge list output")->required();
  split_cmd->callback([&] {
    action = [&]() -> int {
      if (!(holdout > 0.0 && holdout < 1.0)) throw UsageError("--holdout must lie in (0, 1)");
      const RelationData data = read_edges(split_in);
      const Split s = split(data, holdout, split_seed);
      auto train_out = open_out(split_train);
      write_edge_list(train_out, s.train);
      auto test_out = open_out(split_test);
      write_edge_list(test_out, RelationData(data.n(), s.test, true));
      return kExitOk;
    };
  });

  // train
  auto* train = app.add_subcommand("train", "fit the model to an edge list");
  HyperFlags train_flags;
  train_flags.attach(train);
  std::string train_in;
  std::string train_side;
  std::string train_out;
  std::string train_trace;
  std::string train_mode = "full";
  train->add_option("--train", train_in, "training edge list")->required();
  train->add_option("--side", train_side, "side-information file");
  train->add_option("--out", train_out, "checkpoint output")->required();
  train->add_option("--trace", train_trace, "trace JSON output");
  train->add_option("--mode", train_mode, "full, factor-only or block-only")->capture_default_str();
  train->callback([&] {
    action = [&]() -> int {
      const HyperParams hp = train_flags.resolve();
      const AblationMode mode = mode_from(train_mode);
      const RelationData data = read_edges(train_in);
      const auto side = read_side(train_side);
      const SideInfo* side_ptr = side ? &*side : nullptr;
      auto result = fit(data, hp, side_ptr, SweepSchedule{}, mode, std::nullopt,
                        [&](int sweep, double objective) {
                          err << "sweep " << sweep << " objective " << format_double(objective)
                              << '\n';
                        });
      save_checkpoint(result.state, result.trace, train_out);
      const bool monotone = result.trace.monotone();
      if (!train_trace.empty()) {
        json config = hyper_json(hp);
        config["train"] = train_in;
        config["side"] = train_side;
        config["mode"] = std::string(to_string(mode));
        json doc = provenance("train", std::move(config), hp.seed);
        doc["objective_per_sweep"] = result.trace.objective_per_sweep;
        doc["reassignment_counts"] = result.trace.reassignment_counts;
        doc["warnings"] = result.trace.warnings;
        doc["monotone"] = monotone;
        doc["sweeps"] = result.trace.objective_per_sweep.size() - 1;
        emit_json(doc, train_trace, out);
      }
      if (!monotone) {
        err << "error: objective decreased during fitting\n";
        return kExitNumeric;
      }
      return kExitOk;
    };
  });

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "score pairs with a checkpoint");
  std::string predict_ckpt;
  std::string predict_pairs;
  std::string predict_side;
  std::string predict_out;
  predict_cmd->add_option("--checkpoint", predict_ckpt)->required();
  predict_cmd->add_option("--pairs", predict_pairs, "pairs or edge list")->required();
  predict_cmd->add_option("--side", predict_side, "side-information file");
  predict_cmd->add_option("--out", predict_out, "scores output")->required();
  predict_cmd->callback([&] {
    action = [&]() -> int {
      const Checkpoint cp = load_checkpoint(predict_ckpt);
      auto in = open_in(predict_pairs);
      const auto pairs = parse_pairs(in);
      const auto side = read_side(predict_side);
      const auto scores = predict(cp.state, pairs, side ? &*side : nullptr);
      auto sink = open_out(predict_out);
      write_scores(sink, pairs, scores);
      return kExitOk;
    };
  });

  // eval-auc
  auto* eval_auc = app.add_subcommand("eval-auc", "AUC and ROC of scores against held-out labels");
  std::string auc_scores;
  std::string auc_test;
  std::string auc_out;
  eval_auc->add_option("scores", auc_scores, "scores file")->required();
  eval_auc->add_option("test", auc_test, "labeled held-out edge list")->required();
  eval_auc->add_option("--out", auc_out, "metrics JSON output (default: stdout)");
  eval_auc->callback([&] {
    action = [&]() -> int {
      auto in = open_in(auc_scores);
      const auto scored = parse_scores(in);
      const RelationData test = read_edges(auc_test);
      std::vector<double> scores;
      std::vector<int> labels;
      std::unordered_map<std::uint64_t, double> by_pair;
      for (const ScoredPair& p : scored) {
        by_pair[(static_cast<std::uint64_t>(p.i) << 32) | p.j] = p.score;
      }
      double loglik = 0.0;
      for (const Entry& e : test.entries()) {
        auto it = by_pair.find((static_cast<std::uint64_t>(e.i) << 32) | e.j);
        if (it == by_pair.end()) {
          throw DataError("no score for held-out pair (" + std::to_string(e.i) + ", " +
                          std::to_string(e.j) + ")");
        }
        scores.push_back(it->second);
        labels.push_back(e.s);
        const double p = std::clamp(it->second, kSigmaFloor, 1.0 - kSigmaFloor);
        loglik += e.s != 0 ? std::log(p) : std::log1p(-p);
      }
      json doc = provenance("eval-auc", {{"scores", auc_scores}, {"test", auc_test}}, nullptr);
      doc["auc"] = auc(scores, labels);
      json points = json::array();
      for (const auto& [fpr, tpr] : roc(scores, labels)) points.push_back({fpr, tpr});
      doc["roc"] = std::move(points);
      doc["n_pos"] = std::count(labels.begin(), labels.end(), 1);
      doc["n_neg"] = std::count(labels.begin(), labels.end(), 0);
      doc["holdout_log_likelihood"] = loglik;
      emit_json(doc, auc_out, out);
      return kExitOk;
    };
  });

  // eval-nmi
  auto* eval_nmi = app.add_subcommand("eval-nmi", "NMI between two label files");
  std::string nmi_a;
  std::string nmi_b;
  std::string nmi_out;
  eval_nmi->add_option("a", nmi_a, "label file")->required();
  eval_nmi->add_option("b", nmi_b, "label file")->required();
  eval_nmi->add_option("--out", nmi_out, "metrics JSON output (default: stdout)");
  eval_nmi->callback([&] {
    action = [&]() -> int {
      const auto a = read_labels(nmi_a);
      const auto b = read_labels(nmi_b);
      json doc = provenance("eval-nmi", {{"a", nmi_a}, {"b", nmi_b}}, nullptr);
      doc["nmi"] = nmi(a, b);
      emit_json(doc, nmi_out, out);
      return kExitOk;
    };
  });

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "dense matrix of link probabilities");
  std::string recon_ckpt;
  std::string recon_side;
  std::string recon_out;
  recon->add_option("--checkpoint", recon_ckpt)->required();
  recon->add_option("--side", recon_side, "side-information file");
  recon->add_option("--out", recon_out, "CSV output")->required();
  recon->callback([&] {
    action = [&]() -> int {
      const Checkpoint cp = load_checkpoint(recon_ckpt);
      const auto side = read_side(recon_side);
      const Eigen::MatrixXd m = reconstruct(cp.state, side ? &*side : nullptr);
      auto sink = open_out(recon_out);
      write_matrix_csv(sink, m);
      return kExitOk;
    };
  });

  // ablate
  auto* ablate = app.add_subcommand("ablate", "compare full, factor-only and block-only fits");
  HyperFlags ablate_flags;
  ablate_flags.attach(ablate);
  std::string ablate_data;
  std::string ablate_labels;
  std::string ablate_out;
  double ablate_holdout = 0.1;
  int repeats = 1;
  ablate->add_option("--data", ablate_data, "edge list to split")->required();
  ablate->add_option("--labels", ablate_labels, "planted labels for NMI");
  ablate->add_option("--holdout", ablate_holdout)->capture_default_str();
  ablate->add_option("--repeats", repeats)->capture_default_str()->check(CLI::PositiveNumber);
  ablate->add_option("--out", ablate_out, "comparison JSON output (default: stdout)");
  ablate->callback([&] {
    action = [&]() -> int {
      const HyperParams base = ablate_flags.resolve();
      if (!(ablate_holdout > 0.0 && ablate_holdout < 1.0)) {
        throw UsageError("--holdout must lie in (0, 1)");
      }
      const RelationData data = read_edges(ablate_data);
      std::optional<std::vector<int>> truth;
      if (!ablate_labels.empty()) {
        truth = read_labels(ablate_labels);
        if (truth->size() != data.n()) throw DataError("label file does not match object count");
      }
      const AblationMode modes[] = {AblationMode::Full, AblationMode::FactorOnly,
                                    AblationMode::BlockOnly};
      struct Outcome {
        double auc = 0.0;
        std::optional<double> nmi;
        double objective = 0.0;
        bool monotone = true;
        std::size_t sweeps = 0;
      };
      const auto reps = static_cast<std::size_t>(repeats);
      std::vector<Split> splits(reps);
      for (std::size_t r = 0; r < reps; ++r) splits[r] = split(data, ablate_holdout, base.seed + r);
      std::vector<Outcome> outcomes(reps * 3);
      parallel_for(outcomes.size(), [&](std::size_t job) {
        const std::size_t r = job / 3;
        const AblationMode mode = modes[job % 3];
        HyperParams hp = base;
        hp.seed = base.seed + r;
        auto result = fit(splits[r].train, hp, nullptr, SweepSchedule{}, mode);
        Outcome o;
        const auto report = evaluate(result.state, splits[r].test);
        o.auc = report.auc;
        if (truth) {
          o.nmi = mode == AblationMode::FactorOnly ? nmi(factor_labels(result.state.U), *truth)
                                                   : nmi(result.state.z, *truth);
        }
        o.objective = result.trace.objective_per_sweep.back();
        o.monotone = result.trace.monotone();
        o.sweeps = result.trace.objective_per_sweep.size() - 1;
        outcomes[job] = o;
      });

      json config = hyper_json(base);
      config["data"] = ablate_data;
      config["labels"] = ablate_labels;
      config["holdout"] = ablate_holdout;
      config["repeats"] = repeats;
      json doc = provenance("ablate", std::move(config), base.seed);
      bool monotone = true;
      for (std::size_t m = 0; m < 3; ++m) {
        json runs = json::array();
        double auc_sum = 0.0;
        double nmi_sum = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
          const Outcome& o = outcomes[r * 3 + m];
          monotone = monotone && o.monotone;
          auc_sum += o.auc;
          json run = {{"auc", o.auc},
                      {"final_objective", o.objective},
                      {"monotone", o.monotone},
                      {"sweeps", o.sweeps},
                      {"seed", base.seed + r}};
          if (o.nmi) {
            run["nmi"] = *o.nmi;
            nmi_sum += *o.nmi;
          }
          runs.push_back(std::move(run));
        }
        json summary = {{"runs", std::move(runs)}, {"mean_auc", auc_sum / double(reps)}};
        if (truth) summary["mean_nmi"] = nmi_sum / double(reps);
        doc["modes"][std::string(to_string(modes[m]))] = std::move(summary);
      }
      doc["monotone"] = monotone;
      emit_json(doc, ablate_out, out);
      return monotone ? kExitOk : kExitNumeric;
    };
  });

  std::vector<const char*> argv{"lfbm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace lfbm
