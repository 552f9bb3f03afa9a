#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gart/error.hpp"

namespace gart {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// One node of the reverse-mode graph. Data is immutable once the tensor takes
// part in an op; grad buffers are allocated lazily during backward.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  // Propagates this node's grad into the parents' grads. Captures parent
  // pointers and saved forward values, never the node itself.
  std::function<void(TensorNode<T>&)> vjp;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

// Value-semantics handle on a shared graph node.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, T value);
  static Tensor from_data(const Shape& shape, std::vector<T> data);
  static Tensor scalar(T value);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int64_t rank() const { return (int64_t)n_->shape.size(); }
  int64_t numel() const { return (int64_t)n_->data.size(); }
  int64_t dim(int64_t i) const { return n_->shape[(size_t)i]; }

  const T* data() const { return n_->data.data(); }
  // Valid only while filling a freshly created leaf tensor.
  T* mutable_data() { return n_->data.data(); }
  const std::vector<T>& vec() const { return n_->data; }

  T item() const {
    contract_check(numel() == 1, "Tensor::item: tensor is not a scalar");
    return n_->data[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    contract_check(n_->is_leaf || !v,
                   "set_requires_grad: only leaf tensors may be toggled");
    n_->requires_grad = v;
    return *this;
  }

  const std::vector<T>& grad() const {
    contract_check(n_->grad.size() == n_->data.size(),
                   "Tensor::grad: no gradient has been computed");
    return n_->grad;
  }
  bool has_grad() const { return n_->grad.size() == n_->data.size(); }
  void zero_grad() { n_->grad.assign(n_->data.size(), T(0)); }

  // Value copy detached from the graph.
  Tensor detach() const {
    return Tensor::from_data(n_->shape, n_->data);
  }

  std::shared_ptr<TensorNode<T>>& node() { return n_; }
  const std::shared_ptr<TensorNode<T>>& node() const { return n_; }

  static Tensor wrap(std::shared_ptr<TensorNode<T>> n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<TensorNode<T>> n_;
};

// Reverse pass from a scalar tensor. Interior gradients are recomputed from
// scratch on every call while leaf gradients accumulate, so two successive
// calls double leaf grads unless zero_grad() intervenes.
template <typename T>
void backward(const Tensor<T>& loss);

using Tensor64 = Tensor<double>;
using Tensor32 = Tensor<float>;

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template void backward<float>(const Tensor<float>&);
extern template void backward<double>(const Tensor<double>&);

}  // namespace gart
