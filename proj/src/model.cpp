#include "lfbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "detail.hpp"

namespace lfbm {

LogitTerms stable_logit_terms(double x) {
  if (!std::isfinite(x)) throw NumericError("logit is not finite");
  double sigma;
  double llp;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    sigma = 1.0 / (1.0 + e);
    llp = x + std::log1p(e);
  } else {
    const double e = std::exp(x);
    sigma = e / (1.0 + e);
    llp = std::log1p(e);
  }
  sigma = std::clamp(sigma, kSigmaFloor, 1.0 - kSigmaFloor);
  return {sigma, llp};
}

namespace detail {

double logit_unchecked(const LatentState& state, std::size_t i, std::size_t j,
                       const SideInfo* side) {
  double h = state.U.row(static_cast<Eigen::Index>(i)).dot(state.V.row(static_cast<Eigen::Index>(j)));
  h += state.C(state.z[i], state.z[j]);
  h += state.bias;
  if (side != nullptr && state.beta.size() > 0) {
    h += state.beta.dot(side->at(static_cast<Index>(i), static_cast<Index>(j)));
  }
  return h;
}

double log_bernoulli(std::uint8_t s, double h) {
  return (s != 0 ? h : 0.0) - stable_logit_terms(h).llp;
}

double prior_weight(FactorKind kind, const HyperParams& hp) {
  switch (kind) {
    case FactorKind::URow: return hp.lambda_u;
    case FactorKind::VRow: return hp.lambda_v;
    case FactorKind::CFlat: return hp.lambda_c;
    case FactorKind::Beta: return hp.lambda_beta;
    case FactorKind::Bias: return 0.0;
  }
  return 0.0;
}

void check_selector(const FactorSelector& which, const LatentState& state) {
  if ((which.kind == FactorKind::URow || which.kind == FactorKind::VRow) &&
      which.index >= state.n()) {
    throw DataError("selector row " + std::to_string(which.index) + " out of range for n = " +
                    std::to_string(state.n()));
  }
}

Accumulated accumulate(const FactorSelector& which, const LatentState& state,
                       const RelationData& data, const HyperParams& hp, const SideInfo* side,
                       CurvatureMode mode) {
  check_selector(which, state);
  const auto p = static_cast<Eigen::Index>(block_size(which, state));
  const int K = state.K();
  Accumulated acc;
  acc.grad = Eigen::VectorXd::Zero(p);
  if (mode != CurvatureMode::None) acc.hess = Eigen::MatrixXd::Zero(p, p);

  Eigen::VectorXd a(p);
  for_block_entries(which, data, [&](std::size_t pos) {
    const Entry& e = data.entry(pos);
    const auto t = stable_logit_terms(logit_unchecked(state, e.i, e.j, side));
    const double r = double(e.s) - t.sigma;
    const double w = mode == CurvatureMode::Exact ? t.sigma * (1.0 - t.sigma) : 0.25;
    if (which.kind == FactorKind::CFlat) {
      const Eigen::Index k = state.z[e.i] * K + state.z[e.j];
      acc.grad(k) += r;
      if (mode != CurvatureMode::None) acc.hess(k, k) -= w;
      return;
    }
    switch (which.kind) {
      case FactorKind::URow: a = state.V.row(e.j).transpose(); break;
      case FactorKind::VRow: a = state.U.row(e.i).transpose(); break;
      case FactorKind::Beta:
        if (side != nullptr) {
          a = side->at(e.i, e.j);
        } else {
          a.setZero();
        }
        break;
      default: a(0) = 1.0; break;
    }
    acc.grad.noalias() += r * a;
    if (mode != CurvatureMode::None) acc.hess.noalias() -= w * a * a.transpose();
  });

  const double lambda = prior_weight(which.kind, hp);
  if (lambda != 0.0) {
    acc.grad.noalias() -= lambda * get_block(which, state);
    if (mode != CurvatureMode::None) acc.hess.diagonal().array() -= lambda;
  }
  return acc;
}

}  // namespace detail

double logit(const LatentState& state, std::size_t i, std::size_t j, const SideInfo* side) {
  if (i >= state.n() || j >= state.n()) {
    throw DataError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                    ") out of range for n = " + std::to_string(state.n()));
  }
  if (side != nullptr && side->dim() != state.side_dim()) {
    throw DataError("side-info dimension does not match beta");
  }
  return detail::logit_unchecked(state, i, j, side);
}

void check_dimensions(const LatentState& state, const RelationData& data, const SideInfo* side) {
  if (state.n() != data.n()) {
    throw DataError("state has n = " + std::to_string(state.n()) + " but data has n = " +
                    std::to_string(data.n()));
  }
  if (state.V.rows() != state.U.rows() || state.V.cols() != state.U.cols()) {
    throw DataError("U and V shapes differ");
  }
  if (state.z.size() != state.n()) throw DataError("z length does not match n");
  if (state.C.rows() != state.C.cols()) throw DataError("C is not square");
  if (side != nullptr && side->dim() != state.side_dim()) {
    throw DataError("side-info dimension " + std::to_string(side->dim()) +
                    " does not match beta length " + std::to_string(state.side_dim()));
  }
}

double log_posterior(const LatentState& state, const RelationData& data, const HyperParams& hp,
                     const SideInfo* side) {
  check_dimensions(state, data, side);
  double ll = 0.0;
  for (const Entry& e : data.entries()) {
    ll += detail::log_bernoulli(e.s, detail::logit_unchecked(state, e.i, e.j, side));
  }
  ll -= 0.5 * hp.lambda_u * state.U.squaredNorm();
  ll -= 0.5 * hp.lambda_v * state.V.squaredNorm();
  ll -= 0.5 * hp.lambda_c * state.C.squaredNorm();
  ll -= 0.5 * hp.lambda_beta * state.beta.squaredNorm();
  return ll;
}

double block_objective(const FactorSelector& which, const LatentState& state,
                       const RelationData& data, const HyperParams& hp, const SideInfo* side) {
  detail::check_selector(which, state);
  double ll = 0.0;
  detail::for_block_entries(which, data, [&](std::size_t pos) {
    const Entry& e = data.entry(pos);
    ll += detail::log_bernoulli(e.s, detail::logit_unchecked(state, e.i, e.j, side));
  });
  const double lambda = detail::prior_weight(which.kind, hp);
  if (lambda != 0.0) ll -= 0.5 * lambda * get_block(which, state).squaredNorm();
  return ll;
}

std::size_t block_size(const FactorSelector& which, const LatentState& state) {
  switch (which.kind) {
    case FactorKind::URow:
    case FactorKind::VRow: return static_cast<std::size_t>(state.d());
    case FactorKind::CFlat: return static_cast<std::size_t>(state.K()) * state.K();
    case FactorKind::Beta: return state.side_dim();
    case FactorKind::Bias: return 1;
  }
  return 0;
}

Eigen::VectorXd get_block(const FactorSelector& which, const LatentState& state) {
  detail::check_selector(which, state);
  const auto row = static_cast<Eigen::Index>(which.index);
  switch (which.kind) {
    case FactorKind::URow: return state.U.row(row).transpose();
    case FactorKind::VRow: return state.V.row(row).transpose();
    case FactorKind::CFlat: {
      const int K = state.K();
      Eigen::VectorXd flat(K * K);
      for (int k = 0; k < K; ++k) {
        for (int l = 0; l < K; ++l) flat(k * K + l) = state.C(k, l);
      }
      return flat;
    }
    case FactorKind::Beta: return state.beta;
    case FactorKind::Bias: return Eigen::VectorXd::Constant(1, state.bias);
  }
  return {};
}

void set_block(const FactorSelector& which, LatentState& state, const Eigen::VectorXd& values) {
  detail::check_selector(which, state);
  if (static_cast<std::size_t>(values.size()) != block_size(which, state)) {
    throw DataError("block has length " + std::to_string(values.size()) + ", expected " +
                    std::to_string(block_size(which, state)));
  }
  const auto row = static_cast<Eigen::Index>(which.index);
  switch (which.kind) {
    case FactorKind::URow: state.U.row(row) = values.transpose(); break;
    case FactorKind::VRow: state.V.row(row) = values.transpose(); break;
    case FactorKind::CFlat: {
      const int K = state.K();
      for (int k = 0; k < K; ++k) {
        for (int l = 0; l < K; ++l) state.C(k, l) = values(k * K + l);
      }
      break;
    }
    case FactorKind::Beta: state.beta = values; break;
    case FactorKind::Bias: state.bias = values(0); break;
  }
}

Eigen::VectorXd gradient(const FactorSelector& which, const LatentState& state,
                         const RelationData& data, const HyperParams& hp, const SideInfo* side) {
  check_dimensions(state, data, side);
  return detail::accumulate(which, state, data, hp, side, detail::CurvatureMode::None).grad;
}

Eigen::MatrixXd exact_hessian(const FactorSelector& which, const LatentState& state,
                              const RelationData& data, const HyperParams& hp,
                              const SideInfo* side) {
  check_dimensions(state, data, side);
  return detail::accumulate(which, state, data, hp, side, detail::CurvatureMode::Exact).hess;
}

Eigen::MatrixXd curvature(const FactorSelector& which, const LatentState& state,
                          const RelationData& data, const HyperParams& hp, const SideInfo* side) {
  check_dimensions(state, data, side);
  return detail::accumulate(which, state, data, hp, side, detail::CurvatureMode::Bound).hess;
}

MinorizerContext make_minorizer(const FactorSelector& which, const LatentState& state,
                                const RelationData& data, const HyperParams& hp,
                                const SideInfo* side) {
  check_dimensions(state, data, side);
  auto acc = detail::accumulate(which, state, data, hp, side, detail::CurvatureMode::Bound);
  return {get_block(which, state), std::move(acc.grad), std::move(acc.hess),
          log_posterior(state, data, hp, side)};
}

double minorizer_value(const MinorizerContext& ctx, const Eigen::VectorXd& omega) {
  const auto p = ctx.anchor.size();
  if (omega.size() != p || ctx.grad_at_anchor.size() != p || ctx.curvature.rows() != p ||
      ctx.curvature.cols() != p) {
    throw DataError("minorizer dimension mismatch");
  }
  const Eigen::VectorXd step = omega - ctx.anchor;
  return ctx.objective_at_anchor + step.dot(ctx.grad_at_anchor) +
         0.5 * step.dot(ctx.curvature * step);
}

Eigen::VectorXd block_kron(const Eigen::VectorXd& zi, const Eigen::VectorXd& zj) {
  auto one_hot_index = [](const Eigen::VectorXd& v) {
    Eigen::Index hot = -1;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (v(k) == 1.0 && hot < 0) {
        hot = k;
      } else if (v(k) != 0.0) {
        throw DataError("block_kron input is not one-hot");
      }
    }
    if (hot < 0) throw DataError("block_kron input is not one-hot");
    return hot;
  };
  if (zi.size() != zj.size()) throw DataError("block_kron inputs differ in length");
  const Eigen::Index K = zi.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K * K);
  out(one_hot_index(zi) * K + one_hot_index(zj)) = 1.0;
  return out;
}

}  // namespace lfbm
