#include "gart/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace gart {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    contract_check(d >= 0, "shape: negative extent");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = shape;
  n->data.assign((size_t)shape_numel(shape), T(0));
  return wrap(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = shape;
  n->data.assign((size_t)shape_numel(shape), value);
  return wrap(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::from_data(const Shape& shape, std::vector<T> data) {
  contract_check((int64_t)data.size() == shape_numel(shape),
                 "Tensor::from_data: size does not match shape " +
                     shape_str(shape));
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = shape;
  n->data = std::move(data);
  return wrap(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return full({1}, value);
}

template <typename T>
void backward(const Tensor<T>& loss) {
  contract_check(loss.defined() && loss.numel() == 1,
                 "backward: loss must be a defined scalar tensor");
  using Node = TensorNode<T>;
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS; construction order of parents makes the
  // traversal, and therefore all accumulation orders, deterministic.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior grads restart from zero each call; leaf grads accumulate.
  for (Node* n : order) {
    if (!n->is_leaf) {
      n->grad.assign(n->data.size(), T(0));
    } else {
      n->ensure_grad();
    }
  }
  root->ensure_grad();
  root->grad[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->vjp) n->vjp(*n);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace gart
