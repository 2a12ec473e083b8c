#include "mbdp/risk/return_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbdp::risk {

void ReturnDistribution::validate() const {
  if (atoms.empty()) throw std::invalid_argument("ReturnDistribution: no atoms");
  double sum = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (!std::isfinite(atoms[i].value))
      throw std::invalid_argument("ReturnDistribution: non-finite value");
    if (!(atoms[i].prob > 0.0))
      throw std::invalid_argument("ReturnDistribution: probabilities must be positive");
    if (i > 0 && atoms[i].value < atoms[i - 1].value)
      throw std::invalid_argument("ReturnDistribution: atoms not sorted ascending");
    sum += atoms[i].prob;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("ReturnDistribution: probabilities sum to " + std::to_string(sum));
}

double ReturnDistribution::total_prob() const {
  double sum = 0.0;
  for (const Atom& a : atoms) sum += a.prob;
  return sum;
}

double ReturnDistribution::expectation() const {
  double e = 0.0;
  for (const Atom& a : atoms) e += a.value * a.prob;
  return e;
}

ReturnDistribution ReturnDistribution::from_pairs(std::vector<Atom> pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const Atom& a, const Atom& b) { return a.value < b.value; });
  ReturnDistribution out;
  out.atoms.reserve(pairs.size());
  for (const Atom& a : pairs) {
    if (a.prob <= 0.0) continue;
    if (!out.atoms.empty() && out.atoms.back().value == a.value)
      out.atoms.back().prob += a.prob;
    else
      out.atoms.push_back(a);
  }
  return out;
}

ReturnDistribution ReturnDistribution::negated() const {
  ReturnDistribution out;
  out.atoms.resize(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const Atom& src = atoms[atoms.size() - 1 - i];
    out.atoms[i] = {-src.value, src.prob};
  }
  return out;
}

}  // namespace mbdp::risk
