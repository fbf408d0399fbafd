#pragma once

#include "kgep/knowledge_graph.hpp"
#include "kgep/rng.hpp"
#include "kgep/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace kgep {

// Two vectors per entity and per relation, all of dimension d.
struct TransdParams {
    Matrix entity_vec;     // meaning vectors h, t
    Matrix entity_proj;    // projection vectors h_p, t_p
    Matrix relation_vec;   // r
    Matrix relation_proj;  // r_p

    static TransdParams zeros(std::size_t entities, std::size_t relations, int dim);
    int dim() const { return static_cast<int>(entity_vec.cols()); }
    std::size_t entity_count() const { return static_cast<std::size_t>(entity_vec.rows()); }
    std::size_t relation_count() const { return static_cast<std::size_t>(relation_vec.rows()); }
    bool all_finite() const;
    bool operator==(const TransdParams& o) const;
};

using VectorRef = Eigen::Ref<const Vector>;

// (r_p e_p^T + I) e evaluated as r_p (e_p . e) + e.
Vector project(const VectorRef& entity_vec, const VectorRef& entity_proj, const VectorRef& relation_proj);

// -|| h_perp + r - t_perp ||^2. Higher is more plausible.
double energy(const VectorRef& h, const VectorRef& h_p, const VectorRef& t, const VectorRef& t_p,
              const VectorRef& r, const VectorRef& r_p);
double energy(const TransdParams& p, const Triple& triple);

// sum_i max(0, margin + g(corrupted_i) - g(golden_i)).
double margin_loss(const TransdParams& p, std::span<const Triple> golden, std::span<const Triple> corrupted,
                   double margin);

// Adds d(margin_loss)/d(params) into `grad` (same shapes as p) and returns the loss.
double margin_loss_gradient(const TransdParams& p, std::span<const Triple> golden,
                            std::span<const Triple> corrupted, double margin, TransdParams& grad);

// Replaces the head or the tail (50/50) with another entity of the same kind
// such that the result is not a golden triple.
class CorruptionSampler {
public:
    explicit CorruptionSampler(const KnowledgeGraph& kg, int max_attempts = 16);
    // nullopt when no valid corruption was found within the attempt budget.
    std::optional<Triple> corrupt(const Triple& golden, Rng& rng) const;

private:
    const KnowledgeGraph& kg_;
    int max_attempts_;
};

struct TransdTrainOptions {
    int dim = 16;
    int epochs = 100;
    int batch_size = 1024;
    double learning_rate = 0.3;
    double margin = 1.0;
    std::uint64_t seed = 0;
};

struct TransdResult {
    TransdParams params;
    std::vector<double> epoch_loss;
};

// Uniform init in [-6/sqrt(d), 6/sqrt(d)], unit-norm entity vectors, then
// mini-batch SGD on the margin loss with one corruption per golden triple per
// epoch. Entity vectors are renormalized after every epoch. Throws
// std::runtime_error on a non-finite loss.
TransdResult train_transd(const KnowledgeGraph& kg, const TransdTrainOptions& options,
                          const std::function<void(int, double)>& on_epoch = {});

// Filtered tail-prediction hits@n over the graph's triples. A candidate tail
// counts against the golden one when its energy is >= the golden energy, unless
// the candidate triple is itself golden.
double tail_hits_at(const TransdParams& p, const KnowledgeGraph& kg, int n);

void save_transd(const std::filesystem::path& path, const TransdParams& p);
TransdParams load_transd(const std::filesystem::path& path);
void write_transd(std::ostream& out, const TransdParams& p);
TransdParams read_transd(std::istream& in);

}  // namespace kgep
