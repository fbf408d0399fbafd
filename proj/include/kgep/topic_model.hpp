#pragma once

#include "kgep/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace kgep {

struct Corpus {
    std::vector<std::string> vocabulary;                // sorted, unique
    std::vector<std::vector<std::uint32_t>> documents;  // token ids, aligned with the app order

    std::size_t vocabulary_size() const { return vocabulary.size(); }
    bool is_empty_document(std::size_t doc) const { return documents.at(doc).empty(); }
    std::size_t empty_document_count() const;
};

// Lowercase, tokenize, drop stopwords, Porter-stem, then drop terms seen fewer
// than min_term_count times across the corpus. No typo correction.
// Throws when every document ends up empty.
Corpus preprocess(std::span<const std::string> texts, const std::unordered_set<std::string>& stopwords,
                  int min_term_count);

struct LdaOptions {
    int topic_count = 50;
    double alpha = 1.0;
    double beta = 0.01;
    int iterations = 300;
    std::uint64_t seed = 0;
};

struct TopicModel {
    Matrix phi;    // topics x vocabulary, rows sum to 1
    Matrix theta;  // documents x topics, rows sum to 1

    int topic_count() const { return static_cast<int>(phi.rows()); }
};

// Collapsed Gibbs sampling. Phi and theta are the smoothed count ratios of the
// final sweep; empty documents get uniform theta.
TopicModel fit_lda(const Corpus& corpus, const LdaOptions& options);

// Index of the largest proportion; ties resolve to the smallest index.
int dominant_topic(std::span<const double> theta);
std::vector<int> assign_topics(const TopicModel& model);

// (1/sqrt 2) * || sqrt(p) - sqrt(q) ||_2, in [0,1] for probability vectors.
double hellinger_distance(std::span<const double> p, std::span<const double> q);
// 1 - hellinger_distance.
double topic_similarity(std::span<const double> p, std::span<const double> q);

// phi.tsv, theta.tsv (12 significant digits) and vocab.txt under `dir`.
void save_topic_model(const std::filesystem::path& dir, const TopicModel& model,
                      std::span<const std::string> vocabulary);
TopicModel load_topic_model(const std::filesystem::path& dir);

inline std::span<const double> row_span(const Matrix& m, Eigen::Index r) {
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace kgep
