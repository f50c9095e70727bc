#include "irt/grm/response_matrix.hpp"

#include "irt/errors.hpp"

namespace irt {

ResponseMatrix::ResponseMatrix(Eigen::MatrixXi codes, Eigen::VectorXi categories,
                               std::vector<std::string> item_names)
    : codes_(std::move(codes)), categories_(std::move(categories)), item_names_(std::move(item_names)) {
  if (categories_.size() != codes_.cols()) {
    throw ContractError("category counts must be given for every item");
  }
  if (item_names_.empty()) {
    for (int i = 0; i < items(); ++i) {
      item_names_.push_back("item" + std::to_string(i + 1));
    }
  }
  if (static_cast<int>(item_names_.size()) != items()) {
    throw ContractError("item name count differs from item count");
  }
  for (int i = 0; i < items(); ++i) {
    if (categories_[i] < 2) {
      throw ContractError("item " + std::to_string(i + 1) + " has fewer than 2 categories");
    }
    for (int p = 0; p < persons(); ++p) {
      const int c = codes_(p, i);
      if (c < 0 || c > categories_[i]) {
        throw ContractError("response code " + std::to_string(c) + " out of range for item " +
                            std::to_string(i + 1) + " (person " + std::to_string(p + 1) + ")");
      }
    }
  }
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> ResponseMatrix::missing_mask() const {
  return codes_.array() == kMissing;
}

ResponseMatrix ResponseMatrix::select_persons(std::span<const int> persons) const {
  Eigen::MatrixXi sub(static_cast<Eigen::Index>(persons.size()), codes_.cols());
  for (std::size_t r = 0; r < persons.size(); ++r) {
    if (persons[r] < 0 || persons[r] >= this->persons()) {
      throw ContractError("person index out of range");
    }
    sub.row(static_cast<Eigen::Index>(r)) = codes_.row(persons[r]);
  }
  return ResponseMatrix(std::move(sub), categories_, item_names_);
}

}  // namespace irt
