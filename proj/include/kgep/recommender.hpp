#pragma once

#include "kgep/config.hpp"
#include "kgep/knowledge_graph.hpp"
#include "kgep/propagation.hpp"
#include "kgep/transd.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace kgep {

// Trainable side of the model. The TransD tensors are kept separately and never
// updated here.
struct KgepParams {
    Matrix entity_state;    // depth-0 propagation state, seeded from TransD entity_vec
    Matrix relation_state;  // relation vectors scored against users, seeded from TransD relation_vec
    PropagationParams propagation;

    static KgepParams from_transd(const TransdParams& transd, int layer_count, Rng& rng);
    static KgepParams zeros_like(const KgepParams& p);
    double squared_norm() const;
    bool all_finite() const;
    bool operator==(const KgepParams& o) const;
};

// Flat views over every trainable tensor, in a fixed order shared by the
// parameters, their gradients and the optimizer moments.
std::vector<std::span<double>> tensors(KgepParams& p);
std::vector<std::span<double>> tensors(PropagationGradient& g);

struct AdamState {
    KgepParams m;
    KgepParams v;
    std::uint64_t step = 0;
};

struct KgepModel {
    TransdParams transd;  // frozen copy
    KgepParams params;
    AdamState adam;
    KgepConfig config;
    std::uint64_t seed = 0;

    PropagationView view(const KnowledgeGraph& kg) const {
        return {kg, params.entity_state, params.relation_state, params.propagation,
                static_cast<std::size_t>(config.max_neighbors)};
    }
};

struct TrainingInstance {
    EntityId user;
    EntityId positive;
    std::vector<EntityId> negatives;
};

double sigmoid(double x);

// (u_perp + r_INTERACT) . a_perp from the frozen TransD tensors.
double general_logit(const TransdParams& transd, EntityId user, EntityId app);

// Inner products of the combined user and app representations, one per app.
std::vector<double> logits(const KnowledgeGraph& kg, const KgepModel& model, EntityId user,
                           std::span<const EntityId> apps);

// sigmoid of the logit. Throws std::out_of_range on an unknown id.
double score(const KnowledgeGraph& kg, const KgepModel& model, EntityId user, EntityId app);

// Sum of -log(y_pos) - sum log(1 - y_neg) plus lambda * ||params||^2.
// Throws std::runtime_error when the result is not finite.
double bce_loss(const KnowledgeGraph& kg, const KgepModel& model, std::span<const TrainingInstance> batch,
                double lambda);

// Same value; the gradient with respect to model.params is added to grad.
double bce_loss_gradient(const KnowledgeGraph& kg, const KgepModel& model, std::span<const TrainingInstance> batch,
                         double lambda, PropagationGradient& grad);

PropagationGradient zero_gradient(const KgepParams& p);

// Training apps of a user: tails of its INTERACT triples.
std::vector<EntityId> interacted_apps(const KnowledgeGraph& kg, EntityId user);

class NegativeSampler {
public:
    explicit NegativeSampler(const KnowledgeGraph& kg);
    // x apps drawn uniformly (with replacement) among apps the user has not
    // interacted with in training. Throws when no such app exists.
    std::vector<EntityId> sample(EntityId user, int x, Rng& rng) const;

private:
    const KnowledgeGraph& kg_;
    std::span<const EntityId> apps_;
};

struct KgepTrainResult {
    KgepModel model;
    std::vector<double> epoch_loss;
    std::vector<double> validation;  // index 0: before training, then one per epoch
};

struct KgepTrainHooks {
    // Validation metric of the current model, e.g. MAP@10.
    std::function<double(const KgepModel&)> validate;
    std::function<void(int epoch, double loss, double validation)> on_epoch;
};

// Adam on the BCE objective over all INTERACT triples of the graph.
KgepTrainResult train_kgep(const KnowledgeGraph& kg, const TransdParams& transd, const KgepConfig& config,
                           std::uint64_t seed, const KgepTrainHooks& hooks = {});

struct Recommendation {
    EntityId app;
    double score;
};

// Top-k apps by score, ties broken by ascending app label.
std::vector<Recommendation> recommend(const KnowledgeGraph& kg, const KgepModel& model, EntityId user, int k,
                                      bool exclude_train);

void save_model(const std::filesystem::path& path, const KgepModel& model);
KgepModel load_model(const std::filesystem::path& path);
void write_model(std::ostream& out, const KgepModel& model);
KgepModel read_model(std::istream& in);

}  // namespace kgep
