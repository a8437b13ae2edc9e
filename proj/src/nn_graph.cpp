#include "dart/nn/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace dart::nn {

Graph::Node& Graph::alloc() {
  // Slots are recycled across clear() calls; same-size value assignments
  // then reuse their heap buffers.
  if (used_ < nodes_.size()) {
    Node& n = nodes_[used_++];
    n.a = n.b = -1;
    n.extra = 0;
    n.c = 0.0;
    n.param = ParamRef{};
    n.grad_live = false;
    return n;
  }
  nodes_.emplace_back();
  used_ = nodes_.size();
  return nodes_.back();
}

int Graph::input(const Vec& v) {
  Node& n = alloc();
  n.op = Op::Input;
  n.value = v;
  return static_cast<int>(used_) - 1;
}

int Graph::zeros(int len) {
  Node& n = alloc();
  n.op = Op::Input;
  n.value.resize(len);
  n.value.setZero();
  return static_cast<int>(used_) - 1;
}

int Graph::param_vec(ParamRef p) {
  Node& n = alloc();
  n.op = Op::Param;
  n.param = p;
  n.value = p.value->col(0);
  return static_cast<int>(used_) - 1;
}

int Graph::matvec(ParamRef w, int x) {
  Node& n = alloc();
  n.op = Op::MatVec;
  n.param = w;
  n.a = x;
  n.value.resize(w.value->rows());
  n.value.noalias() = (*w.value) * nodes_[x].value;
  return static_cast<int>(used_) - 1;
}

int Graph::add(int a, int b) {
  Node& n = alloc();
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value + nodes_[b].value;
  return static_cast<int>(used_) - 1;
}

int Graph::sub(int a, int b) {
  Node& n = alloc();
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value - nodes_[b].value;
  return static_cast<int>(used_) - 1;
}

int Graph::mul(int a, int b) {
  Node& n = alloc();
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value.cwiseProduct(nodes_[b].value);
  return static_cast<int>(used_) - 1;
}

int Graph::sigmoid(int a) {
  Node& n = alloc();
  n.op = Op::Sigmoid;
  n.a = a;
  n.value = nodes_[a].value.unaryExpr(
      [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return static_cast<int>(used_) - 1;
}

int Graph::tanh(int a) {
  Node& n = alloc();
  n.op = Op::Tanh;
  n.a = a;
  n.value = nodes_[a].value.array().tanh().matrix();
  return static_cast<int>(used_) - 1;
}

int Graph::one_minus(int a) {
  Node& n = alloc();
  n.op = Op::OneMinus;
  n.a = a;
  n.value = (1.0 - nodes_[a].value.array()).matrix();
  return static_cast<int>(used_) - 1;
}

int Graph::concat(int a, int b) {
  Node& n = alloc();
  n.op = Op::Concat;
  n.a = a;
  n.b = b;
  n.value.resize(nodes_[a].value.size() + nodes_[b].value.size());
  n.value.head(nodes_[a].value.size()) = nodes_[a].value;
  n.value.tail(nodes_[b].value.size()) = nodes_[b].value;
  return static_cast<int>(used_) - 1;
}

int Graph::log_softmax(int a) {
  Node& n = alloc();
  n.op = Op::LogSoftmax;
  n.a = a;
  const Vec& z = nodes_[a].value;
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  n.value = (z.array() - lse).matrix();
  return static_cast<int>(used_) - 1;
}

int Graph::exp(int a) {
  Node& n = alloc();
  n.op = Op::Exp;
  n.a = a;
  n.value = nodes_[a].value.array().exp().matrix();
  return static_cast<int>(used_) - 1;
}

int Graph::dot(int a, int b) {
  Node& n = alloc();
  n.op = Op::Dot;
  n.a = a;
  n.b = b;
  n.value.resize(1);
  n.value[0] = nodes_[a].value.dot(nodes_[b].value);
  return static_cast<int>(used_) - 1;
}

int Graph::pick(int a, int index) {
  Node& n = alloc();
  n.op = Op::Pick;
  n.a = a;
  n.extra = index;
  n.value.resize(1);
  n.value[0] = nodes_[a].value[index];
  return static_cast<int>(used_) - 1;
}

int Graph::sum(int a) {
  Node& n = alloc();
  n.op = Op::Sum;
  n.a = a;
  n.value.resize(1);
  n.value[0] = nodes_[a].value.sum();
  return static_cast<int>(used_) - 1;
}

int Graph::scale(int a, double c) {
  Node& n = alloc();
  n.op = Op::Scale;
  n.a = a;
  n.c = c;
  n.value = c * nodes_[a].value;
  return static_cast<int>(used_) - 1;
}

Vec& Graph::grad_of(int id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    n.grad.resize(n.value.size());
    n.grad.setZero();
    n.grad_live = true;
  }
  return n.grad;
}

void Graph::backward(int id) {
  if (nodes_[id].value.size() != 1) {
    throw std::logic_error("backward requires a scalar node");
  }
  grad_of(id)[0] += 1.0;

  for (int i = id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.grad_live) continue;
    const Vec& g = n.grad;
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Param:
        if (n.param.grad != nullptr) n.param.grad->col(0) += g;
        break;
      case Op::MatVec:
        if (n.param.grad != nullptr) {
          n.param.grad->noalias() += g * nodes_[n.a].value.transpose();
        }
        grad_of(n.a).noalias() += n.param.value->transpose() * g;
        break;
      case Op::Add:
        grad_of(n.a) += g;
        grad_of(n.b) += g;
        break;
      case Op::Sub:
        grad_of(n.a) += g;
        grad_of(n.b) -= g;
        break;
      case Op::Mul:
        grad_of(n.a) += g.cwiseProduct(nodes_[n.b].value);
        grad_of(n.b) += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::Sigmoid:
        grad_of(n.a).array() +=
            g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::Tanh:
        grad_of(n.a).array() +=
            g.array() * (1.0 - n.value.array() * n.value.array());
        break;
      case Op::OneMinus:
        grad_of(n.a) -= g;
        break;
      case Op::Concat: {
        const auto na = nodes_[n.a].value.size();
        const auto nb = nodes_[n.b].value.size();
        grad_of(n.a) += g.head(na);
        grad_of(n.b) += g.tail(nb);
        break;
      }
      case Op::LogSoftmax: {
        // d/dz_j = g_j - softmax(z)_j * sum(g)
        const double gsum = g.sum();
        grad_of(n.a).array() += g.array() - n.value.array().exp() * gsum;
        break;
      }
      case Op::Exp:
        grad_of(n.a).array() += g.array() * n.value.array();
        break;
      case Op::Dot:
        grad_of(n.a) += g[0] * nodes_[n.b].value;
        grad_of(n.b) += g[0] * nodes_[n.a].value;
        break;
      case Op::Pick:
        grad_of(n.a)[n.extra] += g[0];
        break;
      case Op::Sum:
        grad_of(n.a).array() += g[0];
        break;
      case Op::Scale:
        grad_of(n.a) += n.c * g;
        break;
    }
  }
}

void Graph::clear() { used_ = 0; }

}  // namespace dart::nn
