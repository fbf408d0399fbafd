#pragma once

#include "kgep/arkg_builder.hpp"
#include "kgep/rating_matrix.hpp"
#include "kgep/recommender.hpp"

#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace kgep {

// Per-user 70/10/20 partition. All three matrices share the index space of the
// matrix they were split from.
struct InteractionSplit {
    TrainingMatrix train;
    RatingMatrix validation;
    RatingMatrix test;
    std::uint64_t seed = 0;
};

struct SplitCounts {
    std::size_t train, validation, test;
};
// round(0.7 n), round(0.1 n), remainder. Throws for n < 3.
SplitCounts split_counts(std::size_t n);

InteractionSplit split_interactions(const RatingMatrix& m, std::uint64_t seed);

struct PrecisionRecall {
    double precision;
    double recall;
};

// Throws std::invalid_argument on duplicates in `ranked`, k < 1 or an empty
// relevant set.
PrecisionRecall precision_recall_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> relevant,
                                      std::size_t k);
// Sum of precision@i over relevant hits i <= k, divided by min(k, |relevant|).
double average_precision_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> relevant,
                              std::size_t k);

// Produces rankings in the app index space of the training matrix, with the
// user's training apps removed.
class Recommender {
public:
    virtual ~Recommender() = default;
    virtual std::string name() const = 0;
    virtual std::vector<std::uint32_t> rank(std::uint32_t user, std::size_t k) const = 0;
};

class PopularityRecommender : public Recommender {
public:
    explicit PopularityRecommender(const TrainingMatrix& train);
    std::string name() const override { return "popularity"; }
    std::vector<std::uint32_t> rank(std::uint32_t user, std::size_t k) const override;

private:
    const RatingMatrix& train_;
    std::vector<std::uint32_t> order_;
};

class UserCfRecommender : public Recommender {
public:
    // neighbors == 0 uses every user with nonzero similarity.
    UserCfRecommender(const TrainingMatrix& train, UserSimilarity similarity, std::size_t neighbors = 0);
    std::string name() const override { return "usercf"; }
    std::vector<std::uint32_t> rank(std::uint32_t user, std::size_t k) const override;
    std::vector<double> scores(std::uint32_t user) const;

private:
    const RatingMatrix& train_;
    UserSimilarity similarity_;
    std::size_t neighbors_;
};

class KgepRecommender : public Recommender {
public:
    KgepRecommender(const KnowledgeGraph& kg, const KgepModel& model, const TrainingMatrix& train);
    std::string name() const override { return "kgep"; }
    std::vector<std::uint32_t> rank(std::uint32_t user, std::size_t k) const override;

private:
    const KnowledgeGraph& kg_;
    const KgepModel& model_;
    const RatingMatrix& train_;
    std::vector<std::optional<EntityId>> user_entity_;
};

// Apps ordered by descending score, ties by ascending index, excluding the
// user's training apps; at most k entries.
std::vector<std::uint32_t> top_k(std::span<const double> scores, std::span<const RatingMatrix::Entry> exclude,
                                 std::size_t k);

struct MetricRow {
    std::string model;
    std::size_t k;
    double precision;
    double recall;
    double map;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    std::size_t evaluated_users = 0;

    const MetricRow& at(const std::string& model, std::size_t k) const;
};

// Averages over users with a nonempty held-out row. Results do not depend on
// the thread count.
MetricReport evaluate(std::span<const Recommender* const> models, const RatingMatrix& held_out,
                      std::span<const std::size_t> ks, int threads = 1);

// MAP@k of one model on one held-out matrix.
double mean_average_precision(const Recommender& model, const RatingMatrix& held_out, std::size_t k, int threads = 1);

// TSV with header model, K, precision, recall, map; six decimals.
void write_report(std::ostream& out, const MetricReport& report);

}  // namespace kgep
