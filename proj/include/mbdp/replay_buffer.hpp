#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "mbdp/types.hpp"

namespace mbdp {

/// Fixed-capacity FIFO replay buffer. Oldest entries are evicted first once
/// the buffer is full. Single writer; readers must not interleave a push.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Validates the transition (finite fields) and checks dimensional
  /// consistency with what the buffer already holds.
  void push(const Transition& t);

  /// i = 0 is the oldest entry still stored.
  const Transition& at(std::size_t i) const;

  /// k distinct entries, uniform without replacement. Same seed, same result.
  /// k > size() is an error, never a silent truncation.
  std::vector<Transition> sample(std::size_t k, std::uint64_t seed) const;
  std::vector<std::size_t> sample_indices(std::size_t k, std::uint64_t seed) const;

  /// One transition per row, oldest first.
  void dump_csv(std::ostream& os) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest entry once the buffer wrapped
  std::vector<Transition> entries_;
};

}  // namespace mbdp
