#pragma once

#include "kgep/config.hpp"
#include "kgep/dataset.hpp"
#include "kgep/knowledge_graph.hpp"
#include "kgep/rating_matrix.hpp"
#include "kgep/topic_model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kgep {

// Ordinal discretizations of the numeric app attributes.
struct AttributeBuckets {
    int popularity = 0;                // floor(log10(installs + 1))
    int quality_halves = 0;            // avg_rating rounded to the nearest 0.5, in half steps (0..10)
    int updated_quarter = 0;           // year * 4 + (quarter - 1)
    std::optional<int> size;           // floor(log2(bytes / MiB + 1)); nullopt for VARIES

    std::string popularity_label() const;
    std::string quality_label() const;  // e.g. "4.5"
    std::string updated_label() const;  // e.g. "2020-Q2"
    std::string size_label() const;     // e.g. "3" or "VARIES"
};

int popularity_bucket(std::uint64_t installs);
int quality_bucket(double avg_rating);
int quarter_bucket(const Date& d);
std::optional<int> size_bucket(std::optional<std::uint64_t> bytes);

AttributeBuckets bucketize(const AppRecord& app);
std::vector<AttributeBuckets> bucketize_attributes(std::span<const AppRecord> apps);

// r_i . r_j / (|r_i|^2 + |r_j|^2 - r_i . r_j); 0 when both vectors are zero.
double tanimoto(std::span<const double> a, std::span<const double> b);
double tanimoto(std::span<const RatingMatrix::Entry> a, std::span<const RatingMatrix::Entry> b);

// Nonzero off-diagonal Tanimoto similarities between the rows of a matrix.
struct UserSimilarity {
    struct Cell {
        std::uint32_t user;
        double value;
    };
    std::vector<std::vector<Cell>> rows;  // per user, sorted by neighbor index

    double at(std::uint32_t i, std::uint32_t j) const;
};
UserSimilarity user_similarity_matrix(const RatingMatrix& m);

enum class SimilarityMetric { Tanimoto, HellingerSimilarity, HellingerDistance, BucketAdjacency };
// Accepts "tanimoto", "hellinger_sim", "hellinger_distance", "bucket_adjacency".
SimilarityMetric parse_similarity_metric(std::string_view name);

struct SimilarityItem {
    EntityId id;
    std::vector<double> values;  // vector, distribution, or a single ordinal
};

// Both directed triples for each unordered pair whose metric value reaches the
// threshold (inclusive). Bucket adjacency links ordinals exactly one step apart
// and ignores the threshold.
std::vector<Triple> extract_similarity_relations(std::span<const SimilarityItem> items, RelationId relation,
                                                 double threshold, SimilarityMetric metric);

// Assembles the ARKG. `apps` must cover every app of the training matrix and is
// aligned row-for-row with `topics.theta` and `topic_of_app`.
KnowledgeGraph build_arkg(std::span<const AppRecord> apps, const TrainingMatrix& train, const TopicModel& topics,
                          std::span<const int> topic_of_app, const KgConfig& config);

std::string topic_label(int topic);

}  // namespace kgep
