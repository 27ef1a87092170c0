#pragma once

#include "crlc/matrix.hpp"

#include <vector>

namespace crlc {

// Clustering evaluation. Accuracy matches clusters to classes with the
// Kuhn-Munkres assignment; NMI uses the arithmetic-mean normalizer; ARI is
// the pair-counting, chance-corrected Rand index. All three are invariant
// under relabeling of either partition.

using Partition = std::vector<int>;  // nonnegative labels

// Minimum-cost assignment of a square cost matrix; result[row] = column.
// O(n^3) shortest augmenting path with potentials; deterministic, ties go
// to the lowest-index column.
std::vector<int> hungarian(const Matrix& cost);

double clustering_accuracy(const Partition& pred, const Partition& truth);
double nmi(const Partition& pred, const Partition& truth);
double ari(const Partition& pred, const Partition& truth);

}  // namespace crlc
