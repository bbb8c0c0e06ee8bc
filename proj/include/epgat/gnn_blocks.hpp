// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/autodiff.hpp"
#include "epgat/linalg.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace epgat::gnn {

// Parameter containers are templated on the tensor type so the same layout
// serves stored parameters (Matrix), tape bindings (ad::Value), gradients and
// optimizer moments.

/// GATv2 propagation: separate left/right projections, attention vector
/// applied after the leaky ReLU, plus a learned scale on the edge weights.
template <class T>
struct GatLayerT {
  T w_left;      // d_in x d_out
  T w_right;     // d_in x d_out
  T attention;   // d_out x 1
  T edge_scale;  // 1 x 1
};

/// Multi-head attention over the stock dimension.
template <class T>
struct AttentionT {
  std::vector<T> w_query;  // per head: d_cat x d_head
  std::vector<T> w_key;
  std::vector<T> w_value;
  T w_out;                 // d_cat x d
};

template <class T>
struct BlockT {
  GatLayerT<T> gat;
  T w_skip;  // d x d
  std::optional<AttentionT<T>> attention;  // absent when parallel attention is off
  T slopes;  // 1 x d PReLU slopes on the block output
};

using GatLayerParams = GatLayerT<Matrix>;
using AttentionParams = AttentionT<Matrix>;
using BlockParams = BlockT<Matrix>;
using GatLayerVars = GatLayerT<ad::Value>;
using AttentionVars = AttentionT<ad::Value>;
using BlockVars = BlockT<ad::Value>;

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kInitialPreluSlope = 0.25;

namespace detail {

template <class L, class R>
void sync_size(const std::vector<L>& lead, std::vector<R>& rest) {
  rest.resize(lead.size());
}
template <class L, class R>
void sync_size(const std::vector<L>&, const std::vector<R>&) {}

template <class L, class R>
void sync_optional(const std::optional<L>& lead, std::optional<R>& rest) {
  if (lead && !rest) rest.emplace();
  if (!lead) rest.reset();
}
template <class L, class R>
void sync_optional(const std::optional<L>&, const std::optional<R>&) {}

}  // namespace detail

/// Calls f(name, lead_tensor, rest_tensors...) for every tensor, in a fixed
/// order. Non-const followers are resized to the leader's structure first.
template <class F, class L, class... R>
void visit_tensors(const std::string& prefix, F&& f, L& lead, R&... rest) {
  if constexpr (requires { lead.w_left; }) {
    f(prefix + "w_left", lead.w_left, rest.w_left...);
    f(prefix + "w_right", lead.w_right, rest.w_right...);
    f(prefix + "attention", lead.attention, rest.attention...);
    f(prefix + "edge_scale", lead.edge_scale, rest.edge_scale...);
  } else if constexpr (requires { lead.w_query; }) {
    (detail::sync_size(lead.w_query, rest.w_query), ...);
    (detail::sync_size(lead.w_key, rest.w_key), ...);
    (detail::sync_size(lead.w_value, rest.w_value), ...);
    for (std::size_t i = 0; i < lead.w_query.size(); ++i) {
      const auto head = std::to_string(i);
      f(prefix + "w_query." + head, lead.w_query[i], rest.w_query[i]...);
      f(prefix + "w_key." + head, lead.w_key[i], rest.w_key[i]...);
      f(prefix + "w_value." + head, lead.w_value[i], rest.w_value[i]...);
    }
    f(prefix + "w_out", lead.w_out, rest.w_out...);
  } else {
    visit_tensors(prefix + "gat.", f, lead.gat, rest.gat...);
    f(prefix + "w_skip", lead.w_skip, rest.w_skip...);
    f(prefix + "slopes", lead.slopes, rest.slopes...);
    (detail::sync_optional(lead.attention, rest.attention), ...);
    if (lead.attention) visit_tensors(prefix + "mha.", f, *lead.attention, *rest.attention...);
  }
}

/// Glorot-uniform matrices from a seeded stream, edge scale 1, PReLU slopes
/// 0.25. The attention matrices are drawn last so that a block with and
/// without parallel attention shares every other initial value.
BlockParams init_block(Index width, Index heads, std::uint64_t seed, bool parallel = true,
                       std::uint64_t stream = 0);

std::size_t parameter_count(const BlockParams& block);

BlockVars bind(ad::Tape& tape, const BlockParams& block);

/// GATv2 layer. For every i, the neighborhood is {j : adjacency(i,j) > 0}
/// plus i itself. Logits e_ij = a . leaky(W_l h_i + W_r h_j) + beta * w_ij are
/// normalized over the neighborhood and aggregate W_r h_j.
ad::Value gatv2_layer(const ad::Value& h, const Matrix& adjacency, const GatLayerVars& params,
                      double leaky_slope = kLeakySlope);

/// Neighborhood mask of gatv2_layer: nonzero entries plus the diagonal.
Mask neighborhood_mask(const Matrix& adjacency);

/// Per-head scaled dot-product attention between stocks followed by the
/// output projection back to width d.
ad::Value multi_head_attention(const ad::Value& input, const AttentionVars& params);

struct BlockState {
  ad::Value propagated;  // propagation stream
  ad::Value parallel;    // parallel stream
};

struct FusedInput {
  ad::Value propagated;  // gatv2(H_{l-1})
  ad::Value fused;       // [H'_{l-1} | gatv2(H_{l-1}) + H_{l-1} W_skip]
};

/// Input of the multi-head attention, exposed for inspection.
FusedInput fuse_streams(const BlockState& state, const Matrix& adjacency, const BlockVars& block,
                        double leaky_slope = kLeakySlope);

/// One parallel graph attention block. With attention, the parallel stream
/// becomes PReLU(mha(fused)) and the propagation stream is the GATv2 output.
/// Without, both streams become PReLU(gatv2(H) + H W_skip).
BlockState parallel_block(const BlockState& state, const Matrix& adjacency,
                          const BlockVars& block, double leaky_slope = kLeakySlope);

}  // namespace epgat::gnn
