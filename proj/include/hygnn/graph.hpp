#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "hygnn/dfl.hpp"
#include "hygnn/init.hpp"
#include "hygnn/ops.hpp"

namespace hygnn {

struct HybridGraphConfig {
  std::size_t scales = 3;      // N
  std::size_t iterations = 3;  // K
  std::size_t channels = 8;    // C
  bool enable_cross_domain = true;
  bool enable_adapter = true;
  double lambda = 0.001;

  void validate() const;
};

/// State of node (domain, scale). Scales are 0-based here.
struct NodeState {
  Domain domain = Domain::counting;
  std::size_t scale = 0;
  Tensor h;  // [B,C,H,W]
};

enum class EdgeKind { cross_scale, cross_domain };

struct EdgeEmbedding {
  EdgeKind kind = EdgeKind::cross_scale;
  Domain source_domain = Domain::counting;
  std::size_t source_scale = 0;
  Domain target_domain = Domain::counting;
  std::size_t target_scale = 0;
  Tensor e;  // [B,C,H,W]
};

/// One-shot learner: spatial mean -> linear -> ReLU -> linear emitting C*C
/// values, reshaped to a per-sample [C,C,1,1] kernel.
struct AdapterNet {
  Tensor hidden_weight;  // [hidden, C]
  Tensor hidden_bias;    // [hidden]
  Tensor out_weight;     // [C*C, hidden]
  Tensor out_bias;       // [C*C]
};

/// Parameters of the relations inside one domain.
struct DomainGraphWeights {
  ConvParams scale_edge;  // 3x3, C -> C
  ConvParams scale_link;  // 1x1, C -> 1
  std::optional<ConvGruParams> cross_domain_gru;  // stage one; absent in single-task mode
  ConvGruParams cross_scale_gru;                  // stage two
  ConvParams readout;  // 1x1, N*C -> 1
};

/// Parameters of the relation from one domain to the other.
struct DirectionWeights {
  ConvParams domain_edge;  // 3x3, C -> C
  ConvParams domain_link;  // 1x1, C -> 1
  std::optional<AdapterNet> phi;  // edge adapter
  std::optional<AdapterNet> eta;  // message adapter
};

struct GraphWeights {
  std::array<DomainGraphWeights, 2> domains;  // indexed by domain_index
  // directions[domain_index(source)]; empty in single-task mode.
  std::optional<std::array<DirectionWeights, 2>> directions;
};

AdapterNet init_adapter(Rng& rng, std::size_t channels, std::size_t hidden);
GraphWeights init_graph_weights(const HybridGraphConfig& config, Rng& rng);

/// e = Conv3x3(h_i - h_j), the relation from scale i to scale j of one domain.
EdgeEmbedding cross_scale_edge_embed(const NodeState& from, const NodeState& to,
                                     const ConvParams& edge_conv);

/// Per-sample dynamic kernel [B,C,C,1,1] predicted from a node state.
Tensor adapter_predict(const Tensor& source, const AdapterNet& net);

/// Adapted state h' = adapter_predict(source) * target, then Conv3x3(h' - target).
/// With the adapter disabled, h' is the raw source state.
EdgeEmbedding cross_domain_edge_embed(const NodeState& source, const NodeState& target,
                                      const DirectionWeights& weights, bool enable_adapter);

/// sigmoid(Conv1x1(e)) as a single-channel map, multiplied into every channel of h_i.
Tensor cross_scale_message(const NodeState& from, const EdgeEmbedding& edge,
                           const ConvParams& link);

/// psi = eta(sigmoid(Conv1x1(e)) * h_source); message = psi * h_target.
/// With the adapter disabled, the gated source state is passed directly.
Tensor cross_domain_message(const NodeState& source, const NodeState& target,
                            const EdgeEmbedding& edge, const DirectionWeights& weights,
                            bool enable_adapter);

/// Two cascaded GRU updates: first from the cross-domain message, then from the
/// aggregated cross-scale message.
NodeState node_update_two_stage(const NodeState& node, const Tensor& cross_domain_msg,
                                const Tensor& cross_scale_msg, const ConvGruParams& first,
                                const ConvGruParams& second);

/// Expects 2N states ordered (counting 0..N-1, localization 0..N-1).
std::vector<NodeState> propagate(const std::vector<NodeState>& states,
                                 const HybridGraphConfig& config, const GraphWeights& weights);

/// Concatenates one domain's states in scale order and projects to one channel.
Tensor readout(const FeaturePyramid& pyramid, const ConvParams& head);
/// Same, from node states; throws if they mix domains or are out of scale order.
Tensor readout(const std::vector<NodeState>& states, const ConvParams& head);

/// Edge list of the hybrid graph, for audits. (source, target) pairs of (domain, scale).
struct GraphEdge {
  EdgeKind kind;
  Domain source_domain;
  std::size_t source_scale;
  Domain target_domain;
  std::size_t target_scale;
};
std::vector<GraphEdge> graph_edges(const HybridGraphConfig& config);

}  // namespace hygnn
