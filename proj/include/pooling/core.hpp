#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Shared small types for the pooling toolkit: network node/arc ids, dense
// matrix/tensor buffers, and the reproducible PRNG used by the instance
// generator and the test corpora.

namespace pooling {

enum class Layer { Input, Pool, Output };

inline const char* layer_name(Layer l) {
  switch (l) {
    case Layer::Input: return "input";
    case Layer::Pool: return "pool";
    case Layer::Output: return "output";
  }
  return "?";
}

struct NodeId {
  Layer layer = Layer::Input;
  int index = 0;

  friend bool operator==(const NodeId& a, const NodeId& b) {
    return a.layer == b.layer && a.index == b.index;
  }
  friend bool operator!=(const NodeId& a, const NodeId& b) { return !(a == b); }
  friend bool operator<(const NodeId& a, const NodeId& b) {
    if (a.layer != b.layer) return static_cast<int>(a.layer) < static_cast<int>(b.layer);
    return a.index < b.index;
  }
};

inline std::string node_label(NodeId n) {
  return std::string(layer_name(n.layer)) + " " + std::to_string(n.index);
}

struct Arc {
  NodeId tail;
  NodeId head;

  friend bool operator==(const Arc& a, const Arc& b) {
    return a.tail == b.tail && a.head == b.head;
  }
  // Canonical arc order: layer pair first (input->pool, input->output,
  // pool->output), then tail index, then head index. Variable indexing
  // everywhere follows this order.
  friend bool operator<(const Arc& a, const Arc& b) {
    if (a.tail.layer != b.tail.layer)
      return static_cast<int>(a.tail.layer) < static_cast<int>(b.tail.layer);
    if (a.head.layer != b.head.layer)
      return static_cast<int>(a.head.layer) < static_cast<int>(b.head.layer);
    if (a.tail.index != b.tail.index) return a.tail.index < b.tail.index;
    return a.head.index < b.head.index;
  }
};

inline std::string arc_label(const Arc& a) {
  return node_label(a.tail) + " -> " + node_label(a.head);
}

// Capacities and variable bounds: absent value means unbounded. Never a
// sentinel float, so serialization cannot confuse "no bound" with a number.
using Bound = std::optional<double>;

// Dense row-major matrix of doubles. Just a buffer with 2d indexing; all the
// quality/penalty tables are small.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.v == b.v;
  }
};

// Dense 3d tensor, used for the per (pool, output, attribute) linearization
// values. Entries for absent arcs are kept at zero.
struct Tensor3 {
  int n1 = 0, n2 = 0, n3 = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int a, int b, int c, double fill = 0.0)
      : n1(a), n2(b), n3(c), v(static_cast<size_t>(a) * b * c, fill) {}

  double& operator()(int a, int b, int c) {
    return v[(static_cast<size_t>(a) * n2 + b) * n3 + c];
  }
  double operator()(int a, int b, int c) const {
    return v[(static_cast<size_t>(a) * n2 + b) * n3 + c];
  }
};

inline double linf_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("linf_diff: size mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
    if (d > m) m = d;
  }
  return m;
}

inline double linf_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("linf_diff: shape mismatch");
  return linf_diff(a.v, b.v);
}

// SplitMix64 (Steele, Lea, Flood; the java.util.SplittableRandom finalizer).
// Chosen as the generator contract because it is a one-line recurrence that
// any reimplementation can reproduce exactly from the 64-bit seed.
struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

  uint64_t next() {
    state += 0x9E3779B97F4B7C15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Inclusive range draw by modular reduction. The modulo bias is below
  // 2^-50 for the ranges used here and keeps the draw sequence trivially
  // reproducible, which matters more than the bias.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
  }

  double uniform_real(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
  }
};

}  // namespace pooling
