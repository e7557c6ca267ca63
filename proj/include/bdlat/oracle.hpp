#pragma once

// Exact analysis of tiny capped chains: generator matrix, transient law by
// uniformization, stationary law by a linear solve on the closed class.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "bdlat/configuration.hpp"
#include "bdlat/errors.hpp"
#include "bdlat/rates.hpp"

namespace bdlat::oracle {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

inline constexpr std::size_t kMaxStates = 4096;

/// All occupancy vectors on <= 3 window sites with entries in [0, cap].
/// State k has digits k = sum_i s_i (cap+1)^i.
class CappedStateSpace {
 public:
  CappedStateSpace(WindowPtr window, int cap) : window_(std::move(window)), cap_(cap) {
    if (window_->size() > 3) throw ConfigError("oracle state space supports at most 3 sites");
    if (cap < 0 || cap > 6) throw ConfigError("oracle cap must be in [0, 6]");
    size_ = 1;
    for (std::size_t i = 0; i < window_->size(); ++i) size_ *= static_cast<std::size_t>(cap + 1);
    if (size_ > kMaxStates) throw ConfigError("oracle state space exceeds 4096 states");
  }

  std::size_t size() const { return size_; }
  std::size_t sites() const { return window_->size(); }
  int cap() const { return cap_; }
  const WindowPtr& window() const { return window_; }

  std::vector<int> state(std::size_t k) const {
    std::vector<int> s(sites());
    for (std::size_t i = 0; i < sites(); ++i) {
      s[i] = static_cast<int>(k % static_cast<std::size_t>(cap_ + 1));
      k /= static_cast<std::size_t>(cap_ + 1);
    }
    return s;
  }

  std::size_t index(const std::vector<int>& s) const {
    if (s.size() != sites()) throw ConfigError("state has the wrong number of sites");
    std::size_t k = 0;
    for (std::size_t i = sites(); i-- > 0;) {
      if (s[i] < 0 || s[i] > cap_) throw ConfigError("state entry outside [0, cap]");
      k = k * static_cast<std::size_t>(cap_ + 1) + static_cast<std::size_t>(s[i]);
    }
    return k;
  }

  Configuration configuration(std::size_t k) const {
    const auto s = state(k);
    return Configuration::from_dense(window_, s);
  }

 private:
  WindowPtr window_;
  int cap_;
  std::size_t size_ = 1;
};

/// Q[s, s+x] = b(x, s) for s(x) < cap, Q[s, s-x] = d(x, s) for s(x) > 0,
/// diagonal = minus the row sum. Births at capped sites are dropped.
template <class Scalar = double>
Matrix<Scalar> build_generator(const CappedStateSpace& space, const RateModel& model) {
  const std::size_t n = space.size();
  Matrix<Scalar> Q = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  auto rates = model.bind(space.window());
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<int> s = space.state(k);
    Scalar out = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double b = rates->birth(i, s);
      const double d = rates->death(i, s);
      if (!(b >= 0.0) || !(d >= 0.0) || !std::isfinite(b) || !std::isfinite(d))
        throw ModelError("oracle: invalid rate in state " + std::to_string(k));
      if (s[i] < space.cap() && b > 0.0) {
        ++s[i];
        Q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(space.index(s))) += Scalar(b);
        --s[i];
        out += Scalar(b);
      }
      if (s[i] > 0 && d > 0.0) {
        --s[i];
        Q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(space.index(s))) += Scalar(d);
        ++s[i];
        out += Scalar(d);
      }
    }
    Q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = -out;
  }
  return Q;
}

/// pi0 exp(Q t) by uniformization. Long horizons are cut into steps with
/// Lambda dt <= 32 so the Poisson weights stay representable; each step is
/// truncated once the remaining Poisson mass is below tol / steps.
template <class Scalar>
RowVector<Scalar> transient(const Matrix<Scalar>& Q, const RowVector<Scalar>& pi0, double t, double tol = 1e-10) {
  if (!(t >= 0.0)) throw ConfigError("transient: t must be >= 0");
  if (Q.rows() != Q.cols() || Q.rows() != pi0.cols()) throw ConfigError("transient: dimension mismatch");
  using std::abs;
  Scalar lambda = 0;
  for (Eigen::Index i = 0; i < Q.rows(); ++i) lambda = std::max<Scalar>(lambda, abs(Q(i, i)));
  if (t == 0.0 || lambda == Scalar(0)) return pi0;
  const Matrix<Scalar> P = Matrix<Scalar>::Identity(Q.rows(), Q.cols()) + Q / lambda;
  const double total = static_cast<double>(lambda) * t;
  const auto steps = static_cast<std::size_t>(std::ceil(total / 32.0));
  const Scalar m = Scalar(total / static_cast<double>(steps));
  const Scalar step_tol = Scalar(tol / static_cast<double>(steps));

  RowVector<Scalar> pi = pi0;
  for (std::size_t s = 0; s < steps; ++s) {
    Scalar weight = std::exp(-m);  // Poisson(m) mass at k
    Scalar mass = weight;
    RowVector<Scalar> term = pi;
    RowVector<Scalar> acc = weight * term;
    for (int k = 1; Scalar(1) - mass > step_tol && k < 100000; ++k) {
      term = term * P;
      weight *= m / Scalar(k);
      mass += weight;
      acc += weight * term;
    }
    pi = acc;
  }
  return pi;
}

/// Communicating classes with no transitions out of them.
template <class Scalar>
std::vector<std::vector<std::size_t>> closed_classes(const Matrix<Scalar>& Q) {
  const auto n = static_cast<std::size_t>(Q.rows());
  std::vector<std::vector<std::size_t>> adj(n), radj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > Scalar(0)) {
        adj[i].push_back(j);
        radj[j].push_back(i);
      }
  // Kosaraju, iterative.
  std::vector<std::size_t> order;
  std::vector<char> seen(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{s, 0}};
    seen[s] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < adj[v].size()) {
        const std::size_t w = adj[v][next++];
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back({w, 0});
        }
      } else {
        order.push_back(v);
        stack.pop_back();
      }
    }
  }
  std::vector<long> comp(n, -1);
  long ncomp = 0;
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t s = order[k];
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = ncomp;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w : radj[v])
        if (comp[w] < 0) {
          comp[w] = ncomp;
          stack.push_back(w);
        }
    }
    ++ncomp;
  }
  std::vector<char> leaks(static_cast<std::size_t>(ncomp), 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : adj[i])
      if (comp[j] != comp[i]) leaks[static_cast<std::size_t>(comp[i])] = 1;
  std::map<long, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i)
    if (!leaks[static_cast<std::size_t>(comp[i])]) members[comp[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [c, v] : members) out.push_back(std::move(v));
  std::sort(out.begin(), out.end());
  return out;
}

template <class Scalar>
struct StationaryResult {
  bool unique = false;
  RowVector<Scalar> pi;  // empty unless unique
  std::vector<std::vector<std::size_t>> classes;
  std::string report;
};

/// The stationary law when exactly one closed class exists (transient states
/// get mass 0). Several closed classes give a multi-class report instead.
template <class Scalar>
StationaryResult<Scalar> stationary(const Matrix<Scalar>& Q) {
  StationaryResult<Scalar> out;
  out.classes = closed_classes(Q);
  if (out.classes.size() != 1) {
    out.report = std::to_string(out.classes.size()) + " closed classes; no unique stationary law";
    return out;
  }
  const auto& cls = out.classes.front();
  const auto m = static_cast<Eigen::Index>(cls.size());
  // pi_C Q_CC = 0 and sum pi_C = 1: transpose and replace the last equation.
  Matrix<Scalar> A(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      A(b, a) = Q(static_cast<Eigen::Index>(cls[static_cast<std::size_t>(a)]),
                  static_cast<Eigen::Index>(cls[static_cast<std::size_t>(b)]));
  A.row(m - 1).setOnes();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(m);
  rhs(m - 1) = 1;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = A.fullPivLu().solve(rhs);
  out.pi = RowVector<Scalar>::Zero(Q.rows());
  for (Eigen::Index a = 0; a < m; ++a) out.pi(static_cast<Eigen::Index>(cls[static_cast<std::size_t>(a)])) = x(a);
  out.unique = true;
  out.report = "unique closed class of " + std::to_string(cls.size()) + " states";
  return out;
}

/// Point mass on state k.
template <class Scalar = double>
RowVector<Scalar> point_mass(const CappedStateSpace& space, std::size_t k) {
  RowVector<Scalar> p = RowVector<Scalar>::Zero(static_cast<Eigen::Index>(space.size()));
  p(static_cast<Eigen::Index>(k)) = 1;
  return p;
}

}  // namespace bdlat::oracle
