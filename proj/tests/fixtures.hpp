#pragma once

#include "kgep/knowledge_graph.hpp"
#include "kgep/propagation.hpp"
#include "kgep/recommender.hpp"
#include "kgep/rng.hpp"
#include "kgep/topic_model.hpp"
#include "kgep/transd.hpp"

#include <algorithm>
#include <cstdio>

#include <vector>

namespace fixtures {

using namespace kgep;

// Untyped graph with random triples; every entity is an App except the first
// `users`, which are Users.
inline KnowledgeGraph random_graph(Rng& rng, std::size_t entities, std::size_t relations, std::size_t triples,
                                   std::size_t users = 0) {
    KnowledgeGraph kg(KnowledgeGraph::Schema::Untyped, relations);
    for (std::size_t i = 0; i < entities; ++i) {
        kg.add_entity(i < users ? EntityKind::User : EntityKind::App, "e" + std::to_string(i));
    }
    for (std::size_t n = 0; n < triples * 4 && kg.triple_count() < triples; ++n) {
        const auto h = static_cast<EntityId>(rng.index(entities));
        const auto t = static_cast<EntityId>(rng.index(entities));
        if (h == t) continue;
        kg.add_triple({h, static_cast<RelationId>(rng.index(relations)), t});
    }
    return kg;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
    return m;
}

inline TransdParams random_transd(Rng& rng, std::size_t entities, std::size_t relations, int d, double scale = 1.0) {
    const auto E = static_cast<Eigen::Index>(entities);
    const auto R = static_cast<Eigen::Index>(relations);
    return {random_matrix(rng, E, d, scale), random_matrix(rng, E, d, scale), random_matrix(rng, R, d, scale),
            random_matrix(rng, R, d, scale)};
}

inline PropagationParams random_propagation(Rng& rng, int layers, int d, double scale = 0.5) {
    PropagationParams p;
    for (int k = 0; k < layers; ++k) {
        Vector b(d);
        for (int i = 0; i < d; ++i) b[i] = rng.uniform(-scale, scale);
        p.layers.push_back({random_matrix(rng, d, 2 * d, scale), b});
    }
    return p;
}

inline KgepModel random_model(Rng& rng, const KnowledgeGraph& kg, int d, int layers) {
    KgepModel m;
    m.transd = random_transd(rng, kg.entity_count(), kg.relation_count(), d, 0.5);
    m.params.entity_state = random_matrix(rng, static_cast<Eigen::Index>(kg.entity_count()), d);
    m.params.relation_state = random_matrix(rng, static_cast<Eigen::Index>(kg.relation_count()), d);
    m.params.propagation = random_propagation(rng, layers, d);
    return m;
}

}  // namespace fixtures

namespace fixtures {

// Documents drawn from `topics` latent topics with disjoint vocabularies of
// `words_per_topic` terms. Each document mixes its main topic (share `purity`)
// with the others.
struct PlantedCorpus {
    kgep::Corpus corpus;
    std::vector<int> topic_of_doc;
    int words_per_topic = 0;
    int true_topic(std::uint32_t word) const { return static_cast<int>(word) / words_per_topic; }
};

inline PlantedCorpus planted_corpus(kgep::Rng& rng, int topics, int words_per_topic, int docs, int length,
                                    double purity = 0.9) {
    PlantedCorpus out;
    out.words_per_topic = words_per_topic;
    for (int t = 0; t < topics; ++t)
        for (int w = 0; w < words_per_topic; ++w) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "t%dw%02d", t, w);
            out.corpus.vocabulary.push_back(buf);
        }
    for (int d = 0; d < docs; ++d) {
        const int main = d % topics;
        std::vector<std::uint32_t> doc;
        for (int i = 0; i < length; ++i) {
            const int t = rng.bernoulli(purity) ? main : static_cast<int>(rng.index(static_cast<std::size_t>(topics)));
            doc.push_back(static_cast<std::uint32_t>(t * words_per_topic + static_cast<int>(rng.index(words_per_topic))));
        }
        out.corpus.documents.push_back(std::move(doc));
        out.topic_of_doc.push_back(main);
    }
    return out;
}

// Best accuracy over all permutations mapping learned topics to true topics.
inline double best_permutation_accuracy(const std::vector<int>& learned, const std::vector<int>& truth, int topics) {
    std::vector<int> perm(static_cast<std::size_t>(topics));
    for (int i = 0; i < topics; ++i) perm[static_cast<std::size_t>(i)] = i;
    double best = 0.0;
    do {
        std::size_t hits = 0;
        for (std::size_t d = 0; d < learned.size(); ++d)
            if (perm[static_cast<std::size_t>(learned[d])] == truth[d]) ++hits;
        best = std::max(best, static_cast<double>(hits) / static_cast<double>(learned.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// True when the top `n` words of every phi row come from a single true topic.
inline bool top_words_pure(const kgep::Matrix& phi, const PlantedCorpus& pc, int n) {
    for (Eigen::Index k = 0; k < phi.rows(); ++k) {
        std::vector<std::uint32_t> order(static_cast<std::size_t>(phi.cols()));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return phi(k, a) > phi(k, b); });
        const int t = pc.true_topic(order[0]);
        for (int i = 1; i < n; ++i)
            if (pc.true_topic(order[static_cast<std::size_t>(i)]) != t) return false;
    }
    return true;
}

}  // namespace fixtures

namespace fixtures {

// Ten entities on a line; relation k-1 links i to i+k for k = 1, 2, 3.
inline kgep::KnowledgeGraph chain_graph(std::size_t entities = 10) {
    kgep::KnowledgeGraph kg(kgep::KnowledgeGraph::Schema::Untyped, 3);
    for (std::size_t i = 0; i < entities; ++i) kg.add_entity(kgep::EntityKind::App, "n" + std::to_string(i));
    for (std::uint32_t k = 1; k <= 3; ++k)
        for (std::uint32_t i = 0; i + k < entities; ++i) kg.add_triple({i, k - 1, i + k});
    return kg;
}

}  // namespace fixtures
