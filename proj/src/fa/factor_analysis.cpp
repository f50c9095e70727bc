#include "irt/fa/factor_analysis.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace irt::fa {

Eigen::MatrixXd correlation_matrix(const ResponseMatrix& data) {
  const int P = data.persons();
  const int I = data.items();
  if (P < 2) {
    throw ValidationError("correlations need at least 2 persons");
  }
  for (int i = 0; i < I; ++i) {
    double first = 0.0;
    bool seen = false;
    bool varies = false;
    for (int p = 0; p < P && !varies; ++p) {
      if (data.missing(p, i)) continue;
      if (!seen) {
        first = data.code(p, i);
        seen = true;
      } else if (data.code(p, i) != first) {
        varies = true;
      }
    }
    if (!varies) {
      throw ValidationError("item " + data.item_names()[static_cast<std::size_t>(i)] +
                            " has zero variance");
    }
  }
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(I, I);
  for (int a = 0; a < I; ++a) {
    for (int b = a + 1; b < I; ++b) {
      double n = 0.0, sa = 0.0, sb = 0.0;
      for (int p = 0; p < P; ++p) {
        if (data.missing(p, a) || data.missing(p, b)) continue;
        n += 1.0;
        sa += data.code(p, a);
        sb += data.code(p, b);
      }
      if (n < 2.0) {
        throw ValidationError("items " + std::to_string(a + 1) + " and " + std::to_string(b + 1) +
                              " share fewer than 2 observations");
      }
      const double ma = sa / n;
      const double mb = sb / n;
      double saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int p = 0; p < P; ++p) {
        if (data.missing(p, a) || data.missing(p, b)) continue;
        const double da = data.code(p, a) - ma;
        const double db = data.code(p, b) - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
      }
      const double r = (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
      corr(a, b) = corr(b, a) = std::clamp(r, -1.0, 1.0);
    }
  }
  return corr;
}

namespace {

Eigen::VectorXd initial_communalities(const Eigen::MatrixXd& corr) {
  const Eigen::Index I = corr.rows();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(corr);
  if (lu.isInvertible()) {
    const Eigen::MatrixXd inv = lu.inverse();
    Eigen::VectorXd h(I);
    bool ok = true;
    for (Eigen::Index i = 0; i < I; ++i) {
      h[i] = 1.0 - 1.0 / inv(i, i);
      ok = ok && std::isfinite(h[i]) && h[i] >= 0.0 && h[i] <= 1.0;
    }
    if (ok) return h;
  }
  // Singular correlation matrix: fall back to the largest absolute correlation per item.
  Eigen::VectorXd h(I);
  for (Eigen::Index i = 0; i < I; ++i) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < I; ++j) {
      if (j != i) best = std::max(best, std::abs(corr(i, j)));
    }
    h[i] = best;
  }
  return h;
}

}  // namespace

LoadingMatrix principal_axis(const Eigen::MatrixXd& corr, int dims, PrincipalAxisOptions options) {
  const Eigen::Index I = corr.rows();
  if (corr.cols() != I || I < 1) {
    throw ContractError("correlation matrix must be square");
  }
  if (dims < 1 || dims >= I) {
    throw ContractError("factor count must satisfy 1 <= D < I");
  }
  if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
      (corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12) {
    throw ContractError("correlation matrix must be symmetric with unit diagonal");
  }
  Eigen::VectorXd h = initial_communalities(corr);
  LoadingMatrix out;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Eigen::MatrixXd reduced = corr;
    reduced.diagonal() = h;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
    // eigenvalues ascend; keep the top `dims`
    out.values.resize(I, dims);
    for (int d = 0; d < dims; ++d) {
      const Eigen::Index k = I - 1 - d;
      const double value = std::max(0.0, eig.eigenvalues()[k]);
      out.values.col(d) = eig.eigenvectors().col(k) * std::sqrt(value);
    }
    Eigen::VectorXd next = out.values.rowwise().squaredNorm().cwiseMin(1.0);
    const double change = (next - h).cwiseAbs().maxCoeff();
    h = next;
    if (change < options.tolerance) {
      apply_sign_convention(out);
      return out;
    }
  }
  apply_sign_convention(out);
  throw NonConvergenceError("principal-axis communalities did not converge in " +
                                std::to_string(options.max_iterations) + " iterations",
                            out);
}

Eigen::VectorXd communalities(const LoadingMatrix& loadings) { return loadings.values.rowwise().squaredNorm(); }

double varimax_criterion(const Eigen::MatrixXd& loadings) {
  const double n = static_cast<double>(loadings.rows());
  const Eigen::ArrayXXd sq = loadings.array().square();
  double total = 0.0;
  for (Eigen::Index d = 0; d < loadings.cols(); ++d) {
    const double mean = sq.col(d).sum() / n;
    total += sq.col(d).square().sum() / n - mean * mean;
  }
  return total;
}

VarimaxResult varimax_with_trace(const LoadingMatrix& loadings, double tolerance, int max_sweeps) {
  const Eigen::Index I = loadings.values.rows();
  const Eigen::Index D = loadings.values.cols();
  VarimaxResult result;
  result.rotation = Eigen::MatrixXd::Identity(D, D);
  result.loadings = loadings;
  if (D < 2) {
    return result;
  }
  Eigen::VectorXd norms = loadings.values.rowwise().norm();
  for (Eigen::Index i = 0; i < I; ++i) {
    if (norms[i] == 0.0) norms[i] = 1.0;
  }
  Eigen::MatrixXd x = loadings.values.array().colwise() / norms.array();
  const double n = static_cast<double>(I);
  double criterion = varimax_criterion(x);
  result.criterion.push_back(criterion);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < D - 1; ++j) {
      for (Eigen::Index k = j + 1; k < D; ++k) {
        const Eigen::ArrayXd a = x.col(j).array();
        const Eigen::ArrayXd b = x.col(k).array();
        const Eigen::ArrayXd u = a.square() - b.square();
        const Eigen::ArrayXd v = 2.0 * a * b;
        const double A = u.sum();
        const double B = v.sum();
        const double C = (u.square() - v.square()).sum();
        const double Dn = 2.0 * (u * v).sum();
        const double phi = 0.25 * std::atan2(Dn - 2.0 * A * B / n, C - (A * A - B * B) / n);
        const double c = std::cos(phi);
        const double s = std::sin(phi);
        Eigen::Matrix2d g;
        g << c, -s, s, c;
        Eigen::MatrixXd pair(I, 2);
        pair << x.col(j), x.col(k);
        pair = pair * g;
        x.col(j) = pair.col(0);
        x.col(k) = pair.col(1);
        Eigen::MatrixXd rj(D, 2);
        rj << result.rotation.col(j), result.rotation.col(k);
        rj = rj * g;
        result.rotation.col(j) = rj.col(0);
        result.rotation.col(k) = rj.col(1);
      }
    }
    const double next = varimax_criterion(x);
    result.criterion.push_back(next);
    const double change = std::abs(next - criterion);
    criterion = next;
    if (change < tolerance) {
      break;
    }
  }
  result.loadings.values = loadings.values * result.rotation;
  result.loadings.rotation = "varimax";
  return result;
}

LoadingMatrix varimax(const LoadingMatrix& loadings) {
  LoadingMatrix out = varimax_with_trace(loadings).loadings;
  if (out.values.cols() > 1) apply_sign_convention(out);
  return out;
}

void apply_sign_convention(LoadingMatrix& loadings) {
  for (Eigen::Index d = 0; d < loadings.values.cols(); ++d) {
    Eigen::Index best = 0;
    loadings.values.col(d).cwiseAbs().maxCoeff(&best);
    if (loadings.values(best, d) < 0.0) {
      loadings.values.col(d) *= -1.0;
    }
  }
}

std::string describe(const ItemAssignment& assignment) {
  switch (assignment.kind) {
    case AssignmentKind::Dimension: return std::to_string(assignment.dimensions.front() + 1);
    case AssignmentKind::Unassigned: return "unassigned";
    case AssignmentKind::Multiple: return "multiple";
  }
  return "unknown";
}

std::vector<ItemAssignment> partition_by_cutoff(const LoadingMatrix& loadings, double cutoff) {
  if (!(cutoff > 0.0)) {
    throw ContractError("cutoff must be positive");
  }
  std::vector<ItemAssignment> out(static_cast<std::size_t>(loadings.values.rows()));
  for (Eigen::Index i = 0; i < loadings.values.rows(); ++i) {
    ItemAssignment& a = out[static_cast<std::size_t>(i)];
    for (Eigen::Index d = 0; d < loadings.values.cols(); ++d) {
      if (std::abs(loadings.values(i, d)) >= cutoff) a.dimensions.push_back(static_cast<int>(d));
    }
    a.kind = a.dimensions.empty()      ? AssignmentKind::Unassigned
             : a.dimensions.size() == 1 ? AssignmentKind::Dimension
                                        : AssignmentKind::Multiple;
  }
  return out;
}

Eigen::MatrixXd init_from_loadings(const Eigen::MatrixXd& loadings, double floor) {
  if (!loadings.allFinite()) {
    throw ContractError("loadings must be finite");
  }
  return (loadings.array() + 1.0).max(floor).matrix();
}

LoadingMatrix exploratory_loadings(const ResponseMatrix& data, int dims) {
  LoadingMatrix loadings = principal_axis(correlation_matrix(data), dims);
  return dims > 1 ? varimax(loadings) : loadings;
}

}  // namespace irt::fa
