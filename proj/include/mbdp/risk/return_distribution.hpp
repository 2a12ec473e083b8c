#pragma once

#include <vector>

#include "mbdp/types.hpp"

namespace mbdp::risk {

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

/// Discrete distribution over returns: atoms sorted ascending by value,
/// strictly positive probabilities summing to 1 within 1e-9.
struct ReturnDistribution {
  std::vector<Atom> atoms;

  void validate() const;
  double total_prob() const;
  double expectation() const;

  /// Sorts, merges exactly-equal values and drops zero-probability atoms.
  static ReturnDistribution from_pairs(std::vector<Atom> pairs);

  /// Distribution of -Z, re-sorted.
  ReturnDistribution negated() const;
};

}  // namespace mbdp::risk
