#include "kgep/arkg_builder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace kgep {

int popularity_bucket(std::uint64_t installs) {
    int b = 0;
    // Integer form of floor(log10(installs + 1)), exact for all 64-bit counts.
    for (long double v = static_cast<long double>(installs) + 1.0L; v >= 10.0L; v /= 10.0L) ++b;
    return b;
}

int quality_bucket(double avg_rating) {
    const double clamped = std::clamp(avg_rating, 0.0, 5.0);
    return static_cast<int>(std::floor(clamped * 2.0 + 0.5));
}

int quarter_bucket(const Date& d) { return d.year * 4 + (d.quarter() - 1); }

std::optional<int> size_bucket(std::optional<std::uint64_t> bytes) {
    if (!bytes) return std::nullopt;
    const double mib = static_cast<double>(*bytes) / (1024.0 * 1024.0);
    return static_cast<int>(std::floor(std::log2(mib + 1.0)));
}

std::string AttributeBuckets::popularity_label() const { return "1e" + std::to_string(popularity); }

std::string AttributeBuckets::quality_label() const {
    return std::to_string(quality_halves / 2) + (quality_halves % 2 ? ".5" : ".0");
}

std::string AttributeBuckets::updated_label() const {
    return std::to_string(updated_quarter / 4) + "-Q" + std::to_string(updated_quarter % 4 + 1);
}

std::string AttributeBuckets::size_label() const { return size ? std::to_string(*size) : "VARIES"; }

AttributeBuckets bucketize(const AppRecord& app) {
    return {popularity_bucket(app.install_count), quality_bucket(app.avg_rating), quarter_bucket(app.updated_date),
            size_bucket(app.size_bytes)};
}

std::vector<AttributeBuckets> bucketize_attributes(std::span<const AppRecord> apps) {
    std::vector<AttributeBuckets> out;
    out.reserve(apps.size());
    for (const auto& a : apps) out.push_back(bucketize(a));
    return out;
}

double tanimoto(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("tanimoto: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = na + nb - dot;
    return denom == 0.0 ? 0.0 : dot / denom;
}

double tanimoto(std::span<const RatingMatrix::Entry> a, std::span<const RatingMatrix::Entry> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& e : a) na += e.rating * e.rating;
    for (const auto& e : b) nb += e.rating * e.rating;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].app < b[j].app) ++i;
        else if (b[j].app < a[i].app) ++j;
        else dot += a[i++].rating * b[j++].rating;
    }
    const double denom = na + nb - dot;
    return denom == 0.0 ? 0.0 : dot / denom;
}

double UserSimilarity::at(std::uint32_t i, std::uint32_t j) const {
    const auto& r = rows.at(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const Cell& c, std::uint32_t u) { return c.user < u; });
    return (it != r.end() && it->user == j) ? it->value : 0.0;
}

UserSimilarity user_similarity_matrix(const RatingMatrix& m) {
    const auto U = static_cast<std::uint32_t>(m.user_count());
    std::vector<std::vector<RatingMatrix::Entry>> by_app(m.app_count());  // (user, rating) reusing Entry
    std::vector<double> norm(U, 0.0);
    for (std::uint32_t u = 0; u < U; ++u) {
        for (const auto& e : m.row(u)) {
            by_app[e.app].push_back({u, e.rating});
            norm[u] += e.rating * e.rating;
        }
    }
    UserSimilarity sim;
    sim.rows.resize(U);
    std::vector<double> dot(U, 0.0);
    std::vector<std::uint32_t> touched;
    for (std::uint32_t u = 0; u < U; ++u) {
        touched.clear();
        for (const auto& e : m.row(u)) {
            for (const auto& other : by_app[e.app]) {
                if (other.app == u) continue;
                if (dot[other.app] == 0.0) touched.push_back(other.app);
                dot[other.app] += e.rating * other.rating;
            }
        }
        std::sort(touched.begin(), touched.end());
        for (auto v : touched) {
            const double s = dot[v] / (norm[u] + norm[v] - dot[v]);
            sim.rows[u].push_back({v, s});
            dot[v] = 0.0;
        }
    }
    return sim;
}

SimilarityMetric parse_similarity_metric(std::string_view name) {
    if (name == "tanimoto") return SimilarityMetric::Tanimoto;
    if (name == "hellinger_sim") return SimilarityMetric::HellingerSimilarity;
    if (name == "hellinger_distance") return SimilarityMetric::HellingerDistance;
    if (name == "bucket_adjacency") return SimilarityMetric::BucketAdjacency;
    throw std::invalid_argument("unknown similarity metric '" + std::string(name) + "'");
}

std::vector<Triple> extract_similarity_relations(std::span<const SimilarityItem> items, RelationId relation,
                                                 double threshold, SimilarityMetric metric) {
    if (metric != SimilarityMetric::BucketAdjacency && !(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("similarity threshold must lie in (0,1)");
    }
    std::vector<Triple> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = i + 1; j < items.size(); ++j) {
            const auto& a = items[i];
            const auto& b = items[j];
            if (a.id == b.id) continue;
            bool linked = false;
            switch (metric) {
            case SimilarityMetric::Tanimoto:
                linked = tanimoto(a.values, b.values) >= threshold;
                break;
            case SimilarityMetric::HellingerSimilarity:
                linked = topic_similarity(a.values, b.values) >= threshold;
                break;
            case SimilarityMetric::HellingerDistance:
                linked = hellinger_distance(a.values, b.values) >= threshold;
                break;
            case SimilarityMetric::BucketAdjacency:
                if (a.values.size() != 1 || b.values.size() != 1) {
                    throw std::invalid_argument("bucket adjacency expects one ordinal per item");
                }
                linked = std::abs(a.values[0] - b.values[0]) == 1.0;
                break;
            }
            if (linked) {
                out.push_back({a.id, relation, b.id});
                out.push_back({b.id, relation, a.id});
            }
        }
    }
    return out;
}

std::string topic_label(int topic) { return "topic-" + std::to_string(topic); }

namespace {

std::string sanitize(std::string s) {
    for (auto& c : s)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

KnowledgeGraph build_arkg(std::span<const AppRecord> apps, const TrainingMatrix& train, const TopicModel& topics,
                          std::span<const int> topic_of_app, const KgConfig& config) {
    const auto& m = train.matrix();
    if (topic_of_app.size() != apps.size() || static_cast<std::size_t>(topics.theta.rows()) != apps.size()) {
        throw std::invalid_argument("build_arkg: topic model is not aligned with the app list");
    }

    KnowledgeGraph kg;
    std::vector<EntityId> user_ids;
    for (const auto& u : m.users()) user_ids.push_back(kg.add_entity(EntityKind::User, sanitize(u)));

    std::unordered_map<std::string, EntityId> app_entity;
    std::vector<EntityId> app_ids;
    for (const auto& a : apps) {
        const auto id = kg.add_entity(EntityKind::App, sanitize(a.app_id));
        if (!app_entity.emplace(a.app_id, id).second) {
            throw std::invalid_argument("build_arkg: duplicate app '" + a.app_id + "'");
        }
        app_ids.push_back(id);
    }
    std::vector<EntityId> matrix_app_ids;
    for (const auto& a : m.apps()) {
        auto it = app_entity.find(a);
        if (it == app_entity.end()) throw std::invalid_argument("build_arkg: no metadata for app '" + a + "'");
        matrix_app_ids.push_back(it->second);
    }

    std::vector<EntityId> topic_ids;
    for (int k = 0; k < topics.topic_count(); ++k) topic_ids.push_back(kg.add_entity(EntityKind::ContentTopic, topic_label(k)));

    const auto buckets = bucketize_attributes(apps);
    std::map<int, EntityId> quality, popularity, updated, size;
    for (std::size_t i = 0; i < apps.size(); ++i) {
        const auto& a = apps[i];
        const auto& b = buckets[i];
        const auto app = app_ids[i];
        const int k = topic_of_app[i];
        if (k < 0 || k >= topics.topic_count()) throw std::invalid_argument("build_arkg: topic index out of range");

        auto q = kg.add_entity(EntityKind::Quality, b.quality_label());
        auto p = kg.add_entity(EntityKind::Popularity, b.popularity_label());
        auto ut = kg.add_entity(EntityKind::UpdatedTime, b.updated_label());
        auto s = kg.add_entity(EntityKind::Size, b.size_label());
        quality.emplace(b.quality_halves, q);
        popularity.emplace(b.popularity, p);
        updated.emplace(b.updated_quarter, ut);
        if (b.size) size.emplace(*b.size, s);

        kg.add_triple(app, RelationKind::HavingCt, topic_ids[static_cast<std::size_t>(k)]);
        kg.add_triple(app, RelationKind::HavingC, kg.add_entity(EntityKind::Category, sanitize(a.category)));
        kg.add_triple(app, RelationKind::OfferedBy, kg.add_entity(EntityKind::Provider, sanitize(a.provider)));
        kg.add_triple(app, RelationKind::ContentR, kg.add_entity(EntityKind::AgeRestriction, sanitize(a.content_rating)));
        kg.add_triple(app, RelationKind::HavingA, kg.add_entity(EntityKind::Ads, a.has_ads ? "ads" : "no-ads"));
        kg.add_triple(app, RelationKind::HavingF, kg.add_entity(EntityKind::Fee, a.is_free ? "free" : "paid"));
        for (const auto& ie : a.interactive_elements) {
            kg.add_triple(app, RelationKind::HavingIe, kg.add_entity(EntityKind::InteractiveElements, sanitize(ie)));
        }
        kg.add_triple(app, RelationKind::HavingQ, q);
        kg.add_triple(app, RelationKind::HavingP, p);
        kg.add_triple(app, RelationKind::HavingUt, ut);
        kg.add_triple(app, RelationKind::HavingS, s);
    }

    for (std::uint32_t u = 0; u < m.user_count(); ++u) {
        for (const auto& e : m.row(u)) kg.add_triple(user_ids[u], RelationKind::Interact, matrix_app_ids[e.app]);
    }

    const auto sim = user_similarity_matrix(m);
    for (std::uint32_t u = 0; u < sim.rows.size(); ++u) {
        for (const auto& c : sim.rows[u]) {
            if (c.value >= config.us) kg.add_triple(user_ids[u], RelationKind::USimilar, user_ids[c.user]);
        }
    }

    std::vector<SimilarityItem> topic_items;
    for (int k = 0; k < topics.topic_count(); ++k) {
        auto row = row_span(topics.phi, k);
        topic_items.push_back({topic_ids[static_cast<std::size_t>(k)], {row.begin(), row.end()}});
    }
    const auto ct_metric =
        config.ct_threshold_on_distance ? SimilarityMetric::HellingerDistance : SimilarityMetric::HellingerSimilarity;
    for (const auto& t : extract_similarity_relations(topic_items, relation_id(RelationKind::CtSimilar), config.cts, ct_metric)) {
        kg.add_triple(t);
    }

    auto link_buckets = [&](const std::map<int, EntityId>& ordinal, RelationKind rel) {
        std::vector<SimilarityItem> items;
        for (const auto& [o, id] : ordinal) items.push_back({id, {static_cast<double>(o)}});
        for (const auto& t : extract_similarity_relations(items, relation_id(rel), 0.5, SimilarityMetric::BucketAdjacency)) {
            kg.add_triple(t);
        }
    };
    link_buckets(quality, RelationKind::QSimilar);
    link_buckets(popularity, RelationKind::PSimilar);
    link_buckets(updated, RelationKind::UtSimilar);
    link_buckets(size, RelationKind::SSimilar);
    return kg;
}

}  // namespace kgep
