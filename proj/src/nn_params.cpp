#include "dart/nn/params.hpp"

#include <cmath>
#include <stdexcept>

namespace dart::nn {

Mat& ParameterSet::add(const std::string& name, Eigen::Index rows,
                       Eigen::Index cols) {
  auto [it, inserted] = entries_.emplace(name, Mat::Zero(rows, cols));
  if (!inserted) throw std::logic_error("duplicate parameter " + name);
  return it->second;
}

Mat& ParameterSet::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter " + name);
  return it->second;
}

const Mat& ParameterSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter " + name);
  return it->second;
}

bool ParameterSet::has(const std::string& name) const {
  return entries_.count(name) != 0;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : entries_) n += static_cast<std::size_t>(m.size());
  return n;
}

bool ParameterSet::all_finite() const {
  for (const auto& [name, m] : entries_) {
    if (!m.allFinite()) return false;
  }
  return true;
}

GradBuffer::GradBuffer(const ParameterSet& params) {
  for (const auto& [name, m] : params.entries()) {
    entries_.emplace(name, Mat::Zero(m.rows(), m.cols()));
  }
}

Mat& GradBuffer::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no gradient " + name);
  return it->second;
}

void GradBuffer::zero() {
  for (auto& [name, m] : entries_) m.setZero();
}

double GradBuffer::global_norm() const {
  double sq = 0.0;
  for (const auto& [name, m] : entries_) sq += m.squaredNorm();
  return std::sqrt(sq);
}

bool GradBuffer::all_finite() const {
  for (const auto& [name, m] : entries_) {
    if (!m.allFinite()) return false;
  }
  return true;
}

void GradBuffer::add(const GradBuffer& other) {
  for (auto& [name, m] : entries_) m += other.entries_.at(name);
}

void GradBuffer::scale(double c) {
  for (auto& [name, m] : entries_) m *= c;
}

AdamState::AdamState(const ParameterSet& params) {
  for (const auto& [name, m] : params.entries()) {
    m_.emplace(name, Mat::Zero(m.rows(), m.cols()));
    v_.emplace(name, Mat::Zero(m.rows(), m.cols()));
  }
}

void AdamState::step(ParameterSet& params, GradBuffer& grads,
                     const AdamOptions& opt) {
  if (opt.clip_norm > 0.0) {
    const double norm = grads.global_norm();
    if (norm > opt.clip_norm) grads.scale(opt.clip_norm / norm);
  }
  t_ += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t_));
  for (auto& [name, theta] : params.entries()) {
    const Mat& g = grads.entries().at(name);
    Mat& m = m_.at(name);
    Mat& v = v_.at(name);
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    theta.array() -=
        opt.lr * (m.array() / bc1) /
        ((v.array() / bc2).sqrt() + opt.eps);
  }
  params.version += 1;
  grads.zero();
}

}  // namespace dart::nn
