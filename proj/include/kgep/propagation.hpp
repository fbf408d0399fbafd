#pragma once

#include "kgep/knowledge_graph.hpp"
#include "kgep/rng.hpp"
#include "kgep/tensor.hpp"

#include <span>
#include <unordered_map>
#include <vector>

namespace kgep {

// One fully connected layer v' = tanh(W (v || agg) + b), W is d x 2d.
struct PropagationLayer {
    Matrix weight;
    Vector bias;
};

struct PropagationParams {
    std::vector<PropagationLayer> layers;

    // Xavier-uniform weights, zero biases.
    static PropagationParams xavier(int layer_count, int dim, Rng& rng);
    static PropagationParams zeros(int layer_count, int dim);
    std::size_t layer_count() const { return layers.size(); }
};

// Everything propagation reads. The user vector inside the relation weights is
// the user's row of entity_state.
struct PropagationView {
    const KnowledgeGraph& kg;
    const Matrix& entity_state;  // depth-0 representation of every entity
    const Matrix& relation_vec;  // relation embeddings scored against the user
    const PropagationParams& params;
    std::size_t max_neighbors = 0;  // 0: full neighborhood
};

// N_v, truncated to its first max_neighbors entries when max_neighbors > 0.
std::span<const Neighbor> neighborhood(const KnowledgeGraph& kg, EntityId v, std::size_t max_neighbors);

// Softmax over the neighborhood of the scores user . relation_vec[r].
// Throws std::invalid_argument on an empty neighborhood.
std::vector<double> relation_weights(const Eigen::Ref<const Vector>& user, std::span<const Neighbor> neighbors,
                                     const Matrix& relation_vec);

// sum_i w_i * state[tail_i].
Vector aggregate_neighbors(const Matrix& state, const Eigen::Ref<const Vector>& user,
                           std::span<const Neighbor> neighbors, const Matrix& relation_vec);

// tanh(W (self || aggregate) + b).
Vector dense_update(const Eigen::Ref<const Vector>& self, const Eigen::Ref<const Vector>& aggregate,
                    const PropagationLayer& layer);

// One synchronous layer over the whole graph: nodes with neighbors are updated
// from the previous state, leaves keep their representation.
Matrix layer_update(const Matrix& state, const Eigen::Ref<const Vector>& user, const KnowledgeGraph& kg,
                    const Matrix& relation_vec, const PropagationLayer& layer, std::size_t max_neighbors = 0);

struct PropagationGradient {
    Matrix entity_state;
    Matrix relation_vec;
    std::vector<PropagationLayer> layers;

    static PropagationGradient zeros_like(const PropagationView& view);
};

// Forward pass restricted to the receptive field of the targets, kept for the
// reverse pass. Output rows follow the order of `targets`.
class PropagationTape {
public:
    PropagationTape(const PropagationView& view, EntityId user, std::span<const EntityId> targets);

    const Matrix& outputs() const { return outputs_; }
    std::size_t receptive_field_size() const { return nodes_.size(); }

    // Accumulates d(loss)/d(parameters) given d(loss)/d(outputs).
    void backward(const Matrix& output_grad, PropagationGradient& grad) const;

private:
    const PropagationView& view_;
    EntityId user_;
    std::vector<EntityId> targets_;
    std::vector<EntityId> nodes_;
    std::unordered_map<EntityId, std::uint32_t> local_;
    std::vector<std::vector<std::uint32_t>> need_;  // need_[k]: nodes whose depth-k state is required
    std::vector<std::vector<double>> weights_;      // per local node, empty until needed
    std::vector<Matrix> state_;                     // per depth, rows by local index
    std::vector<Matrix> aggregate_;                 // per depth >= 1
    Matrix outputs_;

    std::uint32_t local_index(EntityId v);
};

// Depth-L representations of the targets for the given user.
Matrix propagate(const PropagationView& view, EntityId user, std::span<const EntityId> targets);

}  // namespace kgep
