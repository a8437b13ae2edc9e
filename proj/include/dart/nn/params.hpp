#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dart/nn/graph.hpp"

namespace dart::nn {

// Named dense arrays of 64-bit floats. Vector-shaped parameters are stored
// as (n, 1) matrices. Shapes are fixed once added.
class ParameterSet {
 public:
  Mat& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::map<std::string, Mat>& entries() const { return entries_; }
  std::map<std::string, Mat>& entries() { return entries_; }

  std::size_t scalar_count() const;
  bool all_finite() const;

  std::uint64_t version = 0;  // bumped by the optimizer

 private:
  std::map<std::string, Mat> entries_;
};

// Gradient accumulator shaped like a ParameterSet. Owned by whoever runs
// backward passes, so concurrent workers never share one.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParameterSet& params);

  Mat& at(const std::string& name);
  void zero();
  double global_norm() const;
  bool all_finite() const;
  void add(const GradBuffer& other);
  void scale(double c);

  const std::map<std::string, Mat>& entries() const { return entries_; }

 private:
  std::map<std::string, Mat> entries_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global-norm gradient clip; <= 0 disables
};

class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const ParameterSet& params);

  // Applies one bias-corrected Adam update and zeroes the gradients.
  void step(ParameterSet& params, GradBuffer& grads, const AdamOptions& opt);

  long steps_taken() const { return t_; }

 private:
  std::map<std::string, Mat> m_, v_;
  long t_ = 0;
};

}  // namespace dart::nn
