#include "mbdp/replay_buffer.hpp"

#include <numeric>
#include <stdexcept>

#include "mbdp/csv.hpp"
#include "mbdp/rng.hpp"

namespace mbdp {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  entries_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  t.check();
  if (!entries_.empty()) {
    const Transition& ref = entries_.front();
    if (t.state.size() != ref.state.size() || t.action.size() != ref.action.size())
      throw std::invalid_argument("ReplayBuffer::push: transition dimensions differ from buffer contents");
  }
  if (entries_.size() < capacity_) {
    entries_.push_back(t);
  } else {
    entries_[head_] = t;
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= entries_.size()) throw std::out_of_range("ReplayBuffer::at: index out of range");
  if (entries_.size() < capacity_) return entries_[i];
  return entries_[(head_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t k, std::uint64_t seed) const {
  if (k > entries_.size())
    throw std::invalid_argument("ReplayBuffer::sample: k=" + std::to_string(k) +
                                " exceeds buffer size " + std::to_string(entries_.size()));
  // Partial Fisher-Yates over logical indices (0 = oldest).
  std::vector<std::size_t> idx(entries_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  RngStream rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.integer(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t k, std::uint64_t seed) const {
  std::vector<Transition> out;
  out.reserve(k);
  for (std::size_t i : sample_indices(k, seed)) out.push_back(at(i));
  return out;
}

void ReplayBuffer::dump_csv(std::ostream& os) const {
  if (entries_.empty()) {
    os << "empty\n";
    return;
  }
  const Eigen::Index ds = entries_.front().state.size();
  const Eigen::Index da = entries_.front().action.size();
  for (Eigen::Index i = 0; i < ds; ++i) os << "s" << i << ",";
  for (Eigen::Index i = 0; i < da; ++i) os << "a" << i << ",";
  os << "reward,";
  for (Eigen::Index i = 0; i < ds; ++i) os << "ns" << i << ",";
  os << "terminal\n";
  for (std::size_t row = 0; row < size(); ++row) {
    const Transition& t = at(row);
    for (Eigen::Index i = 0; i < ds; ++i) os << fmt_double(t.state(i)) << ",";
    for (Eigen::Index i = 0; i < da; ++i) os << fmt_double(t.action(i)) << ",";
    os << fmt_double(t.reward) << ",";
    for (Eigen::Index i = 0; i < ds; ++i) os << fmt_double(t.next_state(i)) << ",";
    os << (t.terminal ? 1 : 0) << "\n";
  }
}

}  // namespace mbdp
