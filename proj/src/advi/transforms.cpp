#include "irt/advi/transforms.hpp"

namespace irt {

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::Identity: return "identity";
    case TransformKind::Log: return "log";
    case TransformKind::Ordered: return "ordered";
  }
  return "unknown";
}

TransformKind transform_kind_from_string(const std::string& name) {
  if (name == "identity") return TransformKind::Identity;
  if (name == "log") return TransformKind::Log;
  if (name == "ordered") return TransformKind::Ordered;
  throw ValidationError("unknown transform kind '" + name + "'");
}

void TransformSpec::add(std::string block, TransformKind kind, Eigen::Index length) {
  segments_.push_back({std::move(block), kind, size_, length});
  size_ += length;
}

TransformSpec TransformSpec::build(const ModelShape& shape) {
  if (shape.items < 1 || shape.dims < 1 || shape.persons < 0 ||
      shape.categories.size() != shape.items || (shape.categories.array() < 2).any()) {
    throw ContractError("invalid model shape for transforms");
  }
  TransformSpec spec;
  spec.shape_ = shape;
  const Eigen::Index P = shape.persons;
  const Eigen::Index I = shape.items;
  const Eigen::Index D = shape.dims;
  spec.add("traits", TransformKind::Identity, P * D);
  spec.add("discrimination", TransformKind::Log, I * D);
  spec.add("location", TransformKind::Identity, I * D);
  for (Eigen::Index i = 0; i < I; ++i) {
    for (Eigen::Index d = 0; d < D; ++d) {
      spec.add("thresholds[" + std::to_string(i + 1) + "," + std::to_string(d + 1) + "]",
               TransformKind::Ordered, shape.categories[i] - 1);
    }
  }
  spec.add("eta", TransformKind::Log, I);
  spec.add("xi", TransformKind::Log, I * D);
  spec.add("kappa", TransformKind::Log, D);
  return spec;
}

TransformSpec TransformSpec::identity(Eigen::Index n) {
  TransformSpec spec;
  spec.add("x", TransformKind::Identity, n);
  return spec;
}

void TransformSpec::check_length(std::size_t n) const {
  if (static_cast<Eigen::Index>(n) != size_) {
    throw ContractError("coordinate vector has length " + std::to_string(n) + ", expected " +
                        std::to_string(size_));
  }
}

Eigen::VectorXd TransformSpec::inverse(std::span<const double> x) const {
  check_length(x.size());
  Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(x.data(), size_);
  for (const TransformSegment& seg : segments_) {
    const Eigen::Index begin = seg.offset;
    const Eigen::Index end = seg.offset + seg.length;
    switch (seg.kind) {
      case TransformKind::Identity:
        break;
      case TransformKind::Log:
        for (Eigen::Index k = begin; k < end; ++k) {
          if (!(x[static_cast<std::size_t>(k)] > 0.0)) {
            throw ContractError("nonpositive value in positive block " + seg.block);
          }
          u[k] = std::log(x[static_cast<std::size_t>(k)]);
        }
        break;
      case TransformKind::Ordered:
        for (Eigen::Index k = begin + 1; k < end; ++k) {
          const double gap = x[static_cast<std::size_t>(k)] - x[static_cast<std::size_t>(k - 1)];
          if (!(gap > 0.0)) {
            throw ContractError("values in ordered block " + seg.block + " are not increasing");
          }
          u[k] = std::log(gap);
        }
        break;
    }
  }
  return u;
}

std::vector<double> TransformSpec::flatten(const ModelParams<double>& params) const {
  if (params.persons() != shape_.persons || params.items() != shape_.items ||
      params.dims() != shape_.dims) {
    throw ContractError("parameters do not match the transform layout");
  }
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(size_));
  auto append = [&](const auto& m) { x.insert(x.end(), m.data(), m.data() + m.size()); };
  append(params.traits);
  append(params.item.discrimination);
  append(params.item.location);
  for (int i = 0; i < shape_.items; ++i) {
    const Eigen::MatrixXd& tau = params.item.thresholds[static_cast<std::size_t>(i)];
    if (tau.rows() != shape_.categories[i] - 1) {
      throw ContractError("threshold count does not match the transform layout");
    }
    append(tau);
  }
  append(params.scales.item);
  append(params.scales.local);
  append(params.scales.dimension);
  check_length(x.size());
  return x;
}

Eigen::VectorXd TransformSpec::unconstrain(const ModelParams<double>& params) const {
  const std::vector<double> x = flatten(params);
  return inverse(x);
}

const TransformSegment& TransformSpec::segment(const std::string& block) const {
  for (const TransformSegment& seg : segments_) {
    if (seg.block == block) return seg;
  }
  throw ContractError("no transform segment named " + block);
}

}  // namespace irt
