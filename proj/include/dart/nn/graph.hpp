#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace dart::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A parameter leaf as seen by the graph: the value lives in a ParameterSet,
// gradients accumulate into an optional per-caller buffer (null when the
// caller only needs a forward pass).
struct ParamRef {
  const Mat* value = nullptr;
  Mat* grad = nullptr;
};

// Define-by-run reverse-mode tape over double vectors. Scalars are size-1
// vectors. Node ids are indices into the tape; clear() keeps capacity so a
// graph can be rebuilt every step without reallocating.
class Graph {
 public:
  int input(const Vec& v);
  int zeros(int n);
  int param_vec(ParamRef p);           // (n,1) parameter as a vector leaf
  int matvec(ParamRef w, int x);       // W * x
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);               // elementwise
  int sigmoid(int a);
  int tanh(int a);
  int one_minus(int a);                // 1 - a
  int concat(int a, int b);
  int log_softmax(int a);
  int exp(int a);
  int dot(int a, int b);               // scalar
  int pick(int a, int index);          // scalar a[index]
  int sum(int a);                      // scalar
  int scale(int a, double c);

  const Vec& value(int id) const { return nodes_[id].value; }
  double scalar(int id) const { return nodes_[id].value[0]; }

  // Accumulates d(node)/d(leaf) into every reachable ParamRef::grad.
  // `id` must be a scalar node.
  void backward(int id);

  void clear();
  std::size_t size() const { return used_; }

 private:
  enum class Op : std::uint8_t {
    Input,
    Param,
    MatVec,
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    OneMinus,
    Concat,
    LogSoftmax,
    Exp,
    Dot,
    Pick,
    Sum,
    Scale,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int extra = 0;
    double c = 0.0;
    ParamRef param;
    Vec value;
    Vec grad;
    bool grad_live = false;
  };

  Node& alloc();
  Vec& grad_of(int id);

  std::vector<Node> nodes_;
  std::size_t used_ = 0;
};

}  // namespace dart::nn
