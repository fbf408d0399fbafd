#include "kgep/topic_model.hpp"

#include "kgep/rng.hpp"
#include "kgep/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace kgep {

std::size_t Corpus::empty_document_count() const {
    return static_cast<std::size_t>(
        std::count_if(documents.begin(), documents.end(), [](const auto& d) { return d.empty(); }));
}

Corpus preprocess(std::span<const std::string> texts, const std::unordered_set<std::string>& stopwords,
                  int min_term_count) {
    std::vector<std::vector<std::string>> stemmed(texts.size());
    std::map<std::string, std::size_t> counts;
    for (std::size_t d = 0; d < texts.size(); ++d) {
        for (auto& token : text::tokenize(texts[d])) {
            if (stopwords.count(token)) continue;
            auto stem = text::porter_stem(token);
            ++counts[stem];
            stemmed[d].push_back(std::move(stem));
        }
    }

    Corpus corpus;
    std::map<std::string, std::uint32_t> index;
    for (const auto& [term, n] : counts) {
        if (n >= static_cast<std::size_t>(std::max(min_term_count, 1))) {
            index.emplace(term, static_cast<std::uint32_t>(corpus.vocabulary.size()));
            corpus.vocabulary.push_back(term);
        }
    }
    corpus.documents.resize(texts.size());
    for (std::size_t d = 0; d < texts.size(); ++d) {
        for (const auto& term : stemmed[d]) {
            if (auto it = index.find(term); it != index.end()) corpus.documents[d].push_back(it->second);
        }
    }
    if (corpus.empty_document_count() == corpus.documents.size()) {
        throw std::runtime_error("all documents are empty after preprocessing");
    }
    return corpus;
}

TopicModel fit_lda(const Corpus& corpus, const LdaOptions& opt) {
    const int K = opt.topic_count;
    const auto V = static_cast<int>(corpus.vocabulary_size());
    const auto D = corpus.documents.size();
    if (K < 2) throw std::invalid_argument("fit_lda: topic_count must be >= 2");
    if (opt.alpha <= 0.0 || opt.beta <= 0.0) throw std::invalid_argument("fit_lda: alpha and beta must be positive");
    if (opt.iterations < 1) throw std::invalid_argument("fit_lda: iterations must be >= 1");
    if (D == 0 || corpus.empty_document_count() == D) throw std::invalid_argument("fit_lda: corpus is empty");
    if (K > V) {
        throw std::invalid_argument("fit_lda: topic_count " + std::to_string(K) + " exceeds vocabulary size " +
                                    std::to_string(V));
    }
    for (const auto& doc : corpus.documents)
        for (auto w : doc)
            if (w >= static_cast<std::uint32_t>(V)) throw std::invalid_argument("fit_lda: token id out of range");

    Rng rng(opt.seed);
    std::vector<std::vector<int>> z(D);
    std::vector<int> doc_topic(D * K, 0);
    std::vector<int> topic_word(static_cast<std::size_t>(K) * V, 0);
    std::vector<int> topic_total(K, 0);

    for (std::size_t d = 0; d < D; ++d) {
        z[d].resize(corpus.documents[d].size());
        for (std::size_t i = 0; i < z[d].size(); ++i) {
            const int k = static_cast<int>(rng.index(static_cast<std::size_t>(K)));
            z[d][i] = k;
            ++doc_topic[d * K + k];
            ++topic_word[static_cast<std::size_t>(k) * V + corpus.documents[d][i]];
            ++topic_total[k];
        }
    }

    const double vbeta = V * opt.beta;
    std::vector<double> cumulative(K);
    for (int it = 0; it < opt.iterations; ++it) {
        for (std::size_t d = 0; d < D; ++d) {
            const auto& words = corpus.documents[d];
            int* nd = &doc_topic[d * K];
            for (std::size_t i = 0; i < words.size(); ++i) {
                const auto w = words[i];
                int k = z[d][i];
                --nd[k];
                --topic_word[static_cast<std::size_t>(k) * V + w];
                --topic_total[k];

                double total = 0.0;
                for (int t = 0; t < K; ++t) {
                    total += (nd[t] + opt.alpha) * (topic_word[static_cast<std::size_t>(t) * V + w] + opt.beta) /
                             (topic_total[t] + vbeta);
                    cumulative[t] = total;
                }
                const double u = rng.uniform() * total;
                k = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
                if (k >= K) k = K - 1;

                z[d][i] = k;
                ++nd[k];
                ++topic_word[static_cast<std::size_t>(k) * V + w];
                ++topic_total[k];
            }
        }
    }

    TopicModel model;
    model.phi.resize(K, V);
    for (int k = 0; k < K; ++k) {
        for (int w = 0; w < V; ++w) {
            model.phi(k, w) = (topic_word[static_cast<std::size_t>(k) * V + w] + opt.beta) / (topic_total[k] + vbeta);
        }
        model.phi.row(k) /= model.phi.row(k).sum();
    }
    model.theta.resize(static_cast<Eigen::Index>(D), K);
    for (std::size_t d = 0; d < D; ++d) {
        const auto n = static_cast<double>(corpus.documents[d].size());
        for (int k = 0; k < K; ++k) {
            model.theta(static_cast<Eigen::Index>(d), k) =
                n == 0.0 ? 1.0 / K : (doc_topic[d * K + k] + opt.alpha) / (n + K * opt.alpha);
        }
        auto row = model.theta.row(static_cast<Eigen::Index>(d));
        row /= row.sum();
    }
    return model;
}

int dominant_topic(std::span<const double> theta) {
    if (theta.empty()) throw std::invalid_argument("dominant_topic: empty proportions");
    int best = 0;
    for (std::size_t k = 1; k < theta.size(); ++k) {
        if (theta[k] > theta[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    }
    return best;
}

std::vector<int> assign_topics(const TopicModel& model) {
    std::vector<int> out(static_cast<std::size_t>(model.theta.rows()));
    for (Eigen::Index d = 0; d < model.theta.rows(); ++d) out[static_cast<std::size_t>(d)] = dominant_topic(row_span(model.theta, d));
    return out;
}

double hellinger_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("hellinger_distance: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double diff = std::sqrt(p[i]) - std::sqrt(q[i]);
        sum += diff * diff;
    }
    return std::min(1.0, std::sqrt(sum) / std::sqrt(2.0));
}

double topic_similarity(std::span<const double> p, std::span<const double> q) {
    return 1.0 - hellinger_distance(p, q);
}

namespace {

void write_tsv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    char buf[40];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.12g", m(r, c));
            if (c) out << '\t';
            out << buf;
        }
        out << '\n';
    }
}

Matrix read_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw std::runtime_error(path.string() + ": ragged row " + std::to_string(rows.size() + 1));
        }
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

}  // namespace

void save_topic_model(const std::filesystem::path& dir, const TopicModel& model,
                      std::span<const std::string> vocabulary) {
    std::filesystem::create_directories(dir);
    write_tsv(dir / "phi.tsv", model.phi);
    write_tsv(dir / "theta.tsv", model.theta);
    std::ofstream vocab(dir / "vocab.txt", std::ios::binary);
    for (const auto& term : vocabulary) vocab << term << '\n';
}

TopicModel load_topic_model(const std::filesystem::path& dir) {
    TopicModel m;
    m.phi = read_tsv(dir / "phi.tsv");
    m.theta = read_tsv(dir / "theta.tsv");
    if (m.theta.cols() != m.phi.rows()) throw std::runtime_error("topic model: theta/phi topic count mismatch");
    return m;
}

}  // namespace kgep
