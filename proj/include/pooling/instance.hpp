#pragma once

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pooling/core.hpp"

// Pooling network instance: inputs I, pools L, outputs J, quality attributes
// K. Arcs run input->pool, input->output, pool->output. Every node and arc
// may carry a capacity (absent = unbounded); arcs carry a net unit profit;
// inputs carry a quality value per attribute and outputs carry per-attribute
// blend bounds.

namespace pooling {

struct PoolingInstance {
  int num_inputs = 0;
  int num_pools = 0;
  int num_outputs = 0;
  int num_attributes = 0;

  // Arc data, all indexed by arc position in canonical order (see Arc's
  // operator<). finalize() establishes that order and the adjacency lists.
  std::vector<Arc> arcs;
  std::vector<double> arc_weight;
  std::vector<Bound> arc_capacity;

  std::vector<Bound> input_capacity;   // |I|
  std::vector<Bound> pool_capacity;    // |L|
  std::vector<Bound> output_capacity;  // |J|

  Matrix input_quality;  // |I| x |K|
  Matrix quality_lb;     // |J| x |K|
  Matrix quality_ub;     // |J| x |K|

  // Derived adjacency, arc indexes. Rebuilt by finalize(); treat the
  // instance as immutable afterwards.
  std::vector<std::vector<int>> pool_in;            // per pool: arcs from inputs
  std::vector<std::vector<int>> pool_out;           // per pool: arcs to outputs
  std::vector<std::vector<int>> output_in_direct;   // per output: arcs from inputs
  std::vector<std::vector<int>> output_in_pools;    // per output: arcs from pools
  std::vector<std::vector<int>> input_out;          // per input: all leaving arcs

  int num_arcs() const { return static_cast<int>(arcs.size()); }

  // Sorts the arc data into canonical order and rebuilds adjacency. Call
  // once after filling the public fields.
  void finalize() {
    std::vector<int> order(arcs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return arcs[a] < arcs[b]; });
    apply_permutation(order);

    pool_in.assign(num_pools, {});
    pool_out.assign(num_pools, {});
    output_in_direct.assign(num_outputs, {});
    output_in_pools.assign(num_outputs, {});
    input_out.assign(num_inputs, {});
    for (int a = 0; a < num_arcs(); ++a) {
      const Arc& e = arcs[a];
      if (e.tail.layer == Layer::Input && in_range(e.tail.index, num_inputs))
        input_out[e.tail.index].push_back(a);
      if (e.tail.layer == Layer::Input && e.head.layer == Layer::Pool &&
          in_range(e.head.index, num_pools))
        pool_in[e.head.index].push_back(a);
      if (e.tail.layer == Layer::Pool && in_range(e.tail.index, num_pools) &&
          e.head.layer == Layer::Output && in_range(e.head.index, num_outputs))
        pool_out[e.tail.index].push_back(a);
      if (e.head.layer == Layer::Output && in_range(e.head.index, num_outputs)) {
        if (e.tail.layer == Layer::Input)
          output_in_direct[e.head.index].push_back(a);
        else if (e.tail.layer == Layer::Pool)
          output_in_pools[e.head.index].push_back(a);
      }
    }
  }

  int arc_index(NodeId tail, NodeId head) const {
    Arc probe{tail, head};
    auto it = std::lower_bound(arcs.begin(), arcs.end(), probe);
    if (it != arcs.end() && *it == probe) return static_cast<int>(it - arcs.begin());
    return -1;
  }

 private:
  static bool in_range(int i, int n) { return i >= 0 && i < n; }

  void apply_permutation(const std::vector<int>& order) {
    std::vector<Arc> a2(arcs.size());
    std::vector<double> w2(arcs.size());
    std::vector<Bound> c2(arcs.size());
    for (size_t p = 0; p < order.size(); ++p) {
      a2[p] = arcs[order[p]];
      if (order[p] < static_cast<int>(arc_weight.size())) w2[p] = arc_weight[order[p]];
      if (order[p] < static_cast<int>(arc_capacity.size())) c2[p] = arc_capacity[order[p]];
    }
    arcs = std::move(a2);
    arc_weight = std::move(w2);
    arc_capacity = std::move(c2);
  }
};

struct ValidationIssue {
  std::string where;    // which field or entity
  std::string message;  // what is wrong with it
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Structural and value checks. Everything that would make the LP builders or
// formula evaluators meaningless is reported here; loaders run this and
// refuse bad files.
inline ValidationReport validate(const PoolingInstance& inst) {
  ValidationReport rep;
  auto fail = [&rep](std::string where, std::string msg) {
    rep.issues.push_back({std::move(where), std::move(msg)});
  };

  if (inst.num_inputs <= 0) fail("inputs", "need at least one input");
  if (inst.num_pools < 0) fail("pools", "negative pool count");
  if (inst.num_outputs <= 0) fail("outputs", "need at least one output");
  if (inst.num_attributes < 0) fail("attributes", "negative attribute count");

  auto check_dims = [&](const Matrix& m, int r, int c, const char* name) {
    if (m.rows != r || m.cols != c) {
      std::ostringstream os;
      os << "expected " << r << "x" << c << ", got " << m.rows << "x" << m.cols;
      fail(name, os.str());
    }
  };
  check_dims(inst.input_quality, inst.num_inputs, inst.num_attributes, "input_quality");
  check_dims(inst.quality_lb, inst.num_outputs, inst.num_attributes, "quality_lb");
  check_dims(inst.quality_ub, inst.num_outputs, inst.num_attributes, "quality_ub");

  auto check_cap_list = [&](const std::vector<Bound>& caps, int n, const char* name) {
    if (static_cast<int>(caps.size()) != n) {
      fail(name, "capacity list length " + std::to_string(caps.size()) +
                     ", expected " + std::to_string(n));
      return;
    }
    for (int i = 0; i < n; ++i)
      if (caps[i] && *caps[i] < 0)
        fail(std::string(name) + "[" + std::to_string(i) + "]", "negative capacity");
  };
  check_cap_list(inst.input_capacity, inst.num_inputs, "input_capacity");
  check_cap_list(inst.pool_capacity, inst.num_pools, "pool_capacity");
  check_cap_list(inst.output_capacity, inst.num_outputs, "output_capacity");

  if (inst.arc_weight.size() != inst.arcs.size())
    fail("arc_weight", "length does not match arc count");
  if (inst.arc_capacity.size() != inst.arcs.size())
    fail("arc_capacity", "length does not match arc count");

  for (int a = 0; a < inst.num_arcs(); ++a) {
    const Arc& e = inst.arcs[a];
    std::string where = "arc " + std::to_string(a) + " (" + arc_label(e) + ")";
    bool shape_ok =
        (e.tail.layer == Layer::Input && e.head.layer == Layer::Pool) ||
        (e.tail.layer == Layer::Input && e.head.layer == Layer::Output) ||
        (e.tail.layer == Layer::Pool && e.head.layer == Layer::Output);
    if (!shape_ok) fail(where, "arc must run input->pool, input->output or pool->output");
    auto endpoint_ok = [&](NodeId n) {
      int limit = n.layer == Layer::Input    ? inst.num_inputs
                  : n.layer == Layer::Pool   ? inst.num_pools
                                             : inst.num_outputs;
      return n.index >= 0 && n.index < limit;
    };
    if (!endpoint_ok(e.tail)) fail(where, "tail index out of range");
    if (!endpoint_ok(e.head)) fail(where, "head index out of range");
    if (a + 1 < inst.num_arcs() && inst.arcs[a + 1] == e) fail(where, "duplicate arc");
    if (a < static_cast<int>(inst.arc_capacity.size()) && inst.arc_capacity[a] &&
        *inst.arc_capacity[a] < 0)
      fail(where, "negative capacity");
  }

  if (inst.quality_lb.same_shape(inst.quality_ub)) {
    for (int j = 0; j < inst.quality_lb.rows; ++j)
      for (int k = 0; k < inst.quality_lb.cols; ++k)
        if (inst.quality_lb(j, k) > inst.quality_ub(j, k))
          fail("quality bounds (output " + std::to_string(j) + ", attr " + std::to_string(k) + ")",
               "lower bound exceeds upper bound");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Random instance families.
//
// Five size groups; within a group the topology is random: each input is
// connected to each pool and each output independently with probability 1/2,
// and every pool->output arc exists. Unit profits come from node prices
// (inputs cost 0..5, outputs pay 5..14, pools are free), so an arc u->v gets
// weight price(v) - price(u). Output demands are capacitated in 20..59;
// inputs, pools and arcs are uncapacitated. Input qualities are integers in
// 0..9, output upper quality bounds in 2..6, lower bounds 0.
//
// Reproducibility contract: from SplitMix64(seed), draws happen in this
// exact order, one uniform_int call each:
//   input prices c_i (i ascending, 0..5), output prices c_j (5..14),
//   output capacities u_j (20..59), input qualities (i-major, k-minor, 0..9),
//   output quality upper bounds (j-major, k-minor, 2..6),
//   input->pool coin flips (i-major, l-minor, {0,1}, arc iff 1),
//   input->output coin flips (i-major, j-minor, {0,1}, arc iff 1).

enum class SizeGroup { A, B, C, D, E };

struct GroupDims {
  int inputs, pools, outputs, attributes;
};

inline GroupDims group_dims(SizeGroup g) {
  switch (g) {
    case SizeGroup::A: return {3, 2, 3, 2};
    case SizeGroup::B: return {5, 4, 3, 3};
    case SizeGroup::C: return {8, 6, 6, 4};
    case SizeGroup::D: return {12, 10, 8, 5};
    case SizeGroup::E: return {10, 10, 15, 12};
  }
  return {0, 0, 0, 0};
}

inline char group_letter(SizeGroup g) { return "ABCDE"[static_cast<int>(g)]; }

inline std::optional<SizeGroup> parse_group(const std::string& s) {
  if (s.size() == 1) {
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (c >= 'A' && c <= 'E') return static_cast<SizeGroup>(c - 'A');
  }
  return std::nullopt;
}

inline PoolingInstance generate_instance(SizeGroup group, uint64_t seed) {
  GroupDims d = group_dims(group);
  SplitMix64 rng(seed);

  std::vector<int> price_in(d.inputs), price_out(d.outputs);
  for (int i = 0; i < d.inputs; ++i) price_in[i] = rng.uniform_int(0, 5);
  for (int j = 0; j < d.outputs; ++j) price_out[j] = rng.uniform_int(5, 14);

  PoolingInstance inst;
  inst.num_inputs = d.inputs;
  inst.num_pools = d.pools;
  inst.num_outputs = d.outputs;
  inst.num_attributes = d.attributes;

  inst.input_capacity.assign(d.inputs, std::nullopt);
  inst.pool_capacity.assign(d.pools, std::nullopt);
  inst.output_capacity.assign(d.outputs, std::nullopt);
  for (int j = 0; j < d.outputs; ++j)
    inst.output_capacity[j] = static_cast<double>(rng.uniform_int(20, 59));

  inst.input_quality = Matrix(d.inputs, d.attributes);
  for (int i = 0; i < d.inputs; ++i)
    for (int k = 0; k < d.attributes; ++k)
      inst.input_quality(i, k) = static_cast<double>(rng.uniform_int(0, 9));

  inst.quality_lb = Matrix(d.outputs, d.attributes, 0.0);
  inst.quality_ub = Matrix(d.outputs, d.attributes);
  for (int j = 0; j < d.outputs; ++j)
    for (int k = 0; k < d.attributes; ++k)
      inst.quality_ub(j, k) = static_cast<double>(rng.uniform_int(2, 6));

  auto add_arc = [&inst](NodeId t, NodeId h, double w) {
    inst.arcs.push_back({t, h});
    inst.arc_weight.push_back(w);
    inst.arc_capacity.push_back(std::nullopt);
  };
  for (int i = 0; i < d.inputs; ++i)
    for (int l = 0; l < d.pools; ++l)
      if (rng.uniform_int(0, 1) == 1)
        add_arc({Layer::Input, i}, {Layer::Pool, l}, -static_cast<double>(price_in[i]));
  for (int i = 0; i < d.inputs; ++i)
    for (int j = 0; j < d.outputs; ++j)
      if (rng.uniform_int(0, 1) == 1)
        add_arc({Layer::Input, i}, {Layer::Output, j},
                static_cast<double>(price_out[j] - price_in[i]));
  for (int l = 0; l < d.pools; ++l)
    for (int j = 0; j < d.outputs; ++j)
      add_arc({Layer::Pool, l}, {Layer::Output, j}, static_cast<double>(price_out[j]));

  inst.finalize();
  return inst;
}

}  // namespace pooling
