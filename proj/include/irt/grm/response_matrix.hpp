#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace irt {

/// P x I ordinal responses. Codes are 1..J_i; 0 marks a missing response.
class ResponseMatrix {
 public:
  static constexpr int kMissing = 0;

  ResponseMatrix() = default;
  ResponseMatrix(Eigen::MatrixXi codes, Eigen::VectorXi categories,
                 std::vector<std::string> item_names = {});

  int persons() const { return static_cast<int>(codes_.rows()); }
  int items() const { return static_cast<int>(codes_.cols()); }
  int code(int person, int item) const { return codes_(person, item); }
  bool missing(int person, int item) const { return codes_(person, item) == kMissing; }
  int categories(int item) const { return categories_[item]; }
  int max_categories() const { return categories_.size() ? categories_.maxCoeff() : 0; }

  const Eigen::MatrixXi& codes() const { return codes_; }
  const Eigen::VectorXi& categories() const { return categories_; }
  const std::vector<std::string>& item_names() const { return item_names_; }
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> missing_mask() const;

  /// Responses of the listed persons, in the listed order.
  ResponseMatrix select_persons(std::span<const int> persons) const;

 private:
  Eigen::MatrixXi codes_;
  Eigen::VectorXi categories_;
  std::vector<std::string> item_names_;
};

}  // namespace irt
