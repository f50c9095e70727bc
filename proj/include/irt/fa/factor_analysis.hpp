#pragma once

// Linear exploratory factor analysis: Pearson correlations, iterated
// principal-axis extraction and varimax rotation. Used to seed the
// discrimination means and as the linear baseline for item partitions.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "irt/errors.hpp"
#include "irt/grm/response_matrix.hpp"

namespace irt::fa {

struct LoadingMatrix {
  Eigen::MatrixXd values;  // I x D
  std::string rotation = "none";
};

class NonConvergenceError : public NumericalError {
 public:
  NonConvergenceError(const std::string& what, LoadingMatrix last)
      : NumericalError(what), last_(std::move(last)) {}
  const LoadingMatrix& last() const { return last_; }

 private:
  LoadingMatrix last_;
};

/// Pearson correlations over pairwise-complete observations; unit diagonal.
Eigen::MatrixXd correlation_matrix(const ResponseMatrix& data);

struct PrincipalAxisOptions {
  double tolerance = 1e-6;
  int max_iterations = 200;
};

/// Iterated principal-axis factoring starting from squared multiple correlations.
LoadingMatrix principal_axis(const Eigen::MatrixXd& corr, int dims, PrincipalAxisOptions options = {});

/// Communalities h_i = sum_d loading_id^2.
Eigen::VectorXd communalities(const LoadingMatrix& loadings);

/// Raw varimax criterion: sum over columns of the variance of squared loadings.
double varimax_criterion(const Eigen::MatrixXd& loadings);

struct VarimaxResult {
  LoadingMatrix loadings;
  Eigen::MatrixXd rotation;         // D x D orthogonal, rotated = input * rotation (before sign flips)
  std::vector<double> criterion;   // per sweep, on Kaiser-normalized loadings
};

/// Kaiser-normalized varimax by pairwise rotation sweeps until the criterion
/// changes by less than `tolerance`. D = 1 input is returned unchanged.
VarimaxResult varimax_with_trace(const LoadingMatrix& loadings, double tolerance = 1e-8, int max_sweeps = 1000);
LoadingMatrix varimax(const LoadingMatrix& loadings);

/// Flips each column so its largest-magnitude entry is positive.
void apply_sign_convention(LoadingMatrix& loadings);

enum class AssignmentKind { Dimension, Unassigned, Multiple };

struct ItemAssignment {
  AssignmentKind kind = AssignmentKind::Unassigned;
  std::vector<int> dimensions;  // 0-based dimensions with |loading| >= cutoff
};

std::string describe(const ItemAssignment& assignment);

std::vector<ItemAssignment> partition_by_cutoff(const LoadingMatrix& loadings, double cutoff = 0.4);

/// Initial discrimination means: 1 + loading, floored at `floor`.
Eigen::MatrixXd init_from_loadings(const Eigen::MatrixXd& loadings, double floor = 0.05);

/// correlation_matrix -> principal_axis -> varimax (D >= 2) with the sign convention applied.
LoadingMatrix exploratory_loadings(const ResponseMatrix& data, int dims);

}  // namespace irt::fa
