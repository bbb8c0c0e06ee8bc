// SPDX-License-Identifier: Apache-2.0
#include "epgat/gnn_blocks.hpp"

#include "epgat/errors.hpp"

#include <cmath>

namespace epgat::gnn {

BlockParams init_block(Index width, Index heads, std::uint64_t seed, bool parallel,
                       std::uint64_t stream) {
  if (width < 1) throw ConfigError("block width must be positive");
  const Index fused = 2 * width;
  if (parallel) {
    if (heads < 1 || heads > fused) {
      throw ConfigError("heads must be in [1, " + std::to_string(fused) + "], got " +
                        std::to_string(heads));
    }
    if (fused % heads != 0) {
      throw ConfigError("heads (" + std::to_string(heads) + ") must divide the fused width " +
                        std::to_string(fused));
    }
  }
  auto rng = make_rng(seed, stream);
  BlockParams block;
  block.gat.w_left = glorot_uniform(width, width, rng);
  block.gat.w_right = glorot_uniform(width, width, rng);
  block.gat.attention = glorot_uniform(width, 1, rng);
  block.gat.edge_scale = Matrix::Ones(1, 1);
  block.w_skip = glorot_uniform(width, width, rng);
  block.slopes = Matrix::Constant(1, width, kInitialPreluSlope);
  if (parallel) {
    const Index head_width = fused / heads;
    AttentionParams mha;
    for (Index i = 0; i < heads; ++i) {
      mha.w_query.push_back(glorot_uniform(fused, head_width, rng));
      mha.w_key.push_back(glorot_uniform(fused, head_width, rng));
      mha.w_value.push_back(glorot_uniform(fused, head_width, rng));
    }
    mha.w_out = glorot_uniform(fused, width, rng);
    block.attention = std::move(mha);
  }
  return block;
}

std::size_t parameter_count(const BlockParams& block) {
  std::size_t n = 0;
  visit_tensors("", [&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); },
                block);
  return n;
}

BlockVars bind(ad::Tape& tape, const BlockParams& block) {
  BlockVars vars;
  visit_tensors("", [&](const std::string&, const Matrix& m, ad::Value& v) { v = tape.variable(m); },
                block, vars);
  return vars;
}

Mask neighborhood_mask(const Matrix& adjacency) {
  Mask mask = adjacency.array() > 0.0;
  mask.diagonal().setConstant(true);
  return mask;
}

ad::Value gatv2_layer(const ad::Value& h, const Matrix& adjacency, const GatLayerVars& params,
                      double leaky_slope) {
  const Index n = h.rows();
  if (adjacency.rows() != n || adjacency.cols() != n) {
    throw ShapeError("gatv2_layer: adjacency " + shape_string(adjacency) + " for " +
                     std::to_string(n) + " nodes");
  }
  if (params.w_left.rows() != h.cols()) {
    throw ShapeError("gatv2_layer: input width " + std::to_string(h.cols()) +
                     " vs projection " + shape_string(params.w_left.data()));
  }
  auto& tape = h.tape();
  const ad::Value left = ad::matmul(h, params.w_left);
  const ad::Value right = ad::matmul(h, params.w_right);
  const ad::Value pairs = ad::leaky_relu(ad::pairwise_sum(left, right), leaky_slope);
  const ad::Value scores = ad::reshape(ad::matmul(pairs, params.attention), n, n);
  const ad::Value bias = ad::scale_by(tape.constant(adjacency), params.edge_scale);
  const ad::Value weights = ad::masked_row_softmax(ad::add(scores, bias), neighborhood_mask(adjacency));
  return ad::matmul(weights, right);
}

ad::Value multi_head_attention(const ad::Value& input, const AttentionVars& params) {
  const auto heads = params.w_query.size();
  if (heads == 0) throw ConfigError("multi_head_attention: no heads");
  if (input.cols() % static_cast<Index>(heads) != 0) {
    throw ConfigError("multi_head_attention: " + std::to_string(heads) +
                      " heads do not divide width " + std::to_string(input.cols()));
  }
  if (params.w_query.front().rows() != input.cols()) {
    throw ShapeError("multi_head_attention: input " + shape_string(input.data()) +
                     " vs query projection " + shape_string(params.w_query.front().data()));
  }
  std::vector<ad::Value> outputs;
  outputs.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    const ad::Value q = ad::matmul(input, params.w_query[i]);
    const ad::Value k = ad::matmul(input, params.w_key[i]);
    const ad::Value v = ad::matmul(input, params.w_value[i]);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    const ad::Value weights = ad::row_softmax(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt));
    outputs.push_back(ad::matmul(weights, v));
  }
  return ad::matmul(ad::concat_cols(outputs), params.w_out);
}

FusedInput fuse_streams(const BlockState& state, const Matrix& adjacency, const BlockVars& block,
                        double leaky_slope) {
  const ad::Value propagated = gatv2_layer(state.propagated, adjacency, block.gat, leaky_slope);
  const ad::Value mixed = ad::add(propagated, ad::matmul(state.propagated, block.w_skip));
  if (mixed.cols() != state.parallel.cols()) {
    throw ShapeError("parallel_block: propagated width " + std::to_string(mixed.cols()) +
                     " vs parallel stream width " + std::to_string(state.parallel.cols()));
  }
  const ad::Value parts[] = {state.parallel, mixed};
  return {propagated, ad::concat_cols(parts)};
}

BlockState parallel_block(const BlockState& state, const Matrix& adjacency, const BlockVars& block,
                          double leaky_slope) {
  if (!block.attention) {
    const ad::Value propagated = gatv2_layer(state.propagated, adjacency, block.gat, leaky_slope);
    const ad::Value out =
        ad::prelu(ad::add(propagated, ad::matmul(state.propagated, block.w_skip)), block.slopes);
    return {out, out};
  }
  const auto input = fuse_streams(state, adjacency, block, leaky_slope);
  const ad::Value parallel = ad::prelu(multi_head_attention(input.fused, *block.attention), block.slopes);
  if (parallel.cols() != state.parallel.cols()) {
    throw ShapeError("parallel_block: attention output width " + std::to_string(parallel.cols()) +
                     " vs " + std::to_string(state.parallel.cols()));
  }
  return {input.propagated, parallel};
}

}  // namespace epgat::gnn
