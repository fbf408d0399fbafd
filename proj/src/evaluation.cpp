#include "kgep/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_set>

namespace kgep {

namespace {

std::unordered_set<std::uint32_t> relevant_set(std::span<const std::uint32_t> relevant) {
    if (relevant.empty()) throw std::invalid_argument("metrics: relevant set is empty");
    return {relevant.begin(), relevant.end()};
}

void check_ranked(std::span<const std::uint32_t> ranked, std::size_t k) {
    if (k < 1) throw std::invalid_argument("metrics: k must be >= 1");
    std::unordered_set<std::uint32_t> seen;
    for (auto a : ranked)
        if (!seen.insert(a).second) throw std::invalid_argument("metrics: duplicate item in ranked list");
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

SplitCounts split_counts(std::size_t n) {
    if (n < 3) throw std::invalid_argument("split: a user needs at least 3 interactions, got " + std::to_string(n));
    const auto train = static_cast<std::size_t>(std::lround(0.7 * static_cast<double>(n)));
    const auto val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n)));
    return {train, val, n - train - val};
}

InteractionSplit split_interactions(const RatingMatrix& m, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<RatingMatrix::Entry>> train(m.user_count()), val(m.user_count()), test(m.user_count());
    for (std::uint32_t u = 0; u < m.user_count(); ++u) {
        const auto row = m.row(u);
        std::vector<RatingMatrix::Entry> items(row.begin(), row.end());
        if (items.size() < 3) throw std::invalid_argument("split: user '" + m.users()[u] + "' has fewer than 3 interactions");
        const auto c = split_counts(items.size());
        rng.shuffle(std::span<RatingMatrix::Entry>(items));
        train[u].assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(c.train));
        val[u].assign(items.begin() + static_cast<std::ptrdiff_t>(c.train),
                      items.begin() + static_cast<std::ptrdiff_t>(c.train + c.validation));
        test[u].assign(items.begin() + static_cast<std::ptrdiff_t>(c.train + c.validation), items.end());
        for (auto* part : {&train[u], &val[u], &test[u]}) {
            std::sort(part->begin(), part->end(), [](const auto& a, const auto& b) { return a.app < b.app; });
        }
    }
    return {TrainingMatrix(m.with_rows(std::move(train))), m.with_rows(std::move(val)), m.with_rows(std::move(test)),
            seed};
}

PrecisionRecall precision_recall_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> relevant,
                                      std::size_t k) {
    check_ranked(ranked, k);
    const auto rel = relevant_set(relevant);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) hits += rel.count(ranked[i]);
    return {static_cast<double>(hits) / static_cast<double>(k),
            static_cast<double>(hits) / static_cast<double>(rel.size())};
}

double average_precision_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> relevant,
                              std::size_t k) {
    check_ranked(ranked, k);
    const auto rel = relevant_set(relevant);
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        if (rel.count(ranked[i])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(std::min(k, rel.size()));
}

std::vector<std::uint32_t> top_k(std::span<const double> scores, std::span<const RatingMatrix::Entry> exclude,
                                 std::size_t k) {
    std::vector<char> skip(scores.size(), 0);
    for (const auto& e : exclude) skip.at(e.app) = 1;
    std::vector<std::uint32_t> idx;
    for (std::uint32_t a = 0; a < scores.size(); ++a)
        if (!skip[a]) idx.push_back(a);
    const auto cmp = [&](std::uint32_t a, std::uint32_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; };
    const auto n = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(), cmp);
    idx.resize(n);
    return idx;
}

PopularityRecommender::PopularityRecommender(const TrainingMatrix& train) : train_(train.matrix()) {
    std::vector<double> counts(train_.app_count(), 0.0);
    for (std::uint32_t u = 0; u < train_.user_count(); ++u)
        for (const auto& e : train_.row(u)) counts[e.app] += 1.0;
    order_ = top_k(counts, {}, counts.size());
}

std::vector<std::uint32_t> PopularityRecommender::rank(std::uint32_t user, std::size_t k) const {
    const auto row = train_.row(user);
    std::vector<std::uint32_t> out;
    for (auto a : order_) {
        if (out.size() >= k) break;
        const bool seen = std::binary_search(row.begin(), row.end(), RatingMatrix::Entry{a, 0.0},
                                             [](const auto& x, const auto& y) { return x.app < y.app; });
        if (!seen) out.push_back(a);
    }
    return out;
}

UserCfRecommender::UserCfRecommender(const TrainingMatrix& train, UserSimilarity similarity, std::size_t neighbors)
    : train_(train.matrix()), similarity_(std::move(similarity)), neighbors_(neighbors) {
    if (similarity_.rows.size() != train_.user_count()) {
        throw std::invalid_argument("UserCF: similarity matrix does not match the training matrix");
    }
}

std::vector<double> UserCfRecommender::scores(std::uint32_t user) const {
    auto cells = similarity_.rows.at(user);
    if (neighbors_ > 0 && cells.size() > neighbors_) {
        std::stable_sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
        cells.resize(neighbors_);
    }
    std::vector<double> s(train_.app_count(), 0.0);
    for (const auto& c : cells) {
        if (c.user == user || c.value < 0.0) continue;
        for (const auto& e : train_.row(c.user)) s[e.app] += c.value * e.rating;
    }
    return s;
}

std::vector<std::uint32_t> UserCfRecommender::rank(std::uint32_t user, std::size_t k) const {
    return top_k(scores(user), train_.row(user), k);
}

KgepRecommender::KgepRecommender(const KnowledgeGraph& kg, const KgepModel& model, const TrainingMatrix& train)
    : kg_(kg), model_(model), train_(train.matrix()) {
    for (const auto& u : train_.users()) user_entity_.push_back(kg.find(EntityKind::User, u));
}

std::vector<std::uint32_t> KgepRecommender::rank(std::uint32_t user, std::size_t k) const {
    const auto entity = user_entity_.at(user);
    if (!entity) return {};
    std::vector<std::uint32_t> out;
    for (const auto& r : recommend(kg_, model_, *entity, static_cast<int>(train_.app_count()), true)) {
        if (out.size() >= k) break;
        const auto a = train_.app_index(kg_.entity(r.app).label);
        if (a && !train_.contains(user, *a)) out.push_back(*a);
    }
    return out;
}

const MetricRow& MetricReport::at(const std::string& model, std::size_t k) const {
    for (const auto& r : rows)
        if (r.model == model && r.k == k) return r;
    throw std::out_of_range("no metric row for " + model + "@" + std::to_string(k));
}

MetricReport evaluate(std::span<const Recommender* const> models, const RatingMatrix& held_out,
                      std::span<const std::size_t> ks, int threads) {
    if (ks.empty()) throw std::invalid_argument("evaluate: no cutoffs given");
    const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
    std::vector<std::uint32_t> users;
    for (std::uint32_t u = 0; u < held_out.user_count(); ++u)
        if (!held_out.row(u).empty()) users.push_back(u);

    MetricReport report;
    report.evaluated_users = users.size();
    for (const auto* model : models) {
        // per user, per cutoff: precision, recall, ap
        std::vector<double> cells(users.size() * ks.size() * 3, 0.0);
        parallel_for(users.size(), threads, [&](std::size_t i) {
            const auto u = users[i];
            std::vector<std::uint32_t> relevant;
            for (const auto& e : held_out.row(u)) relevant.push_back(e.app);
            const auto ranked = model->rank(u, max_k);
            for (std::size_t j = 0; j < ks.size(); ++j) {
                const auto pr = precision_recall_at_k(ranked, relevant, ks[j]);
                double* c = &cells[(i * ks.size() + j) * 3];
                c[0] = pr.precision;
                c[1] = pr.recall;
                c[2] = average_precision_at_k(ranked, relevant, ks[j]);
            }
        });
        for (std::size_t j = 0; j < ks.size(); ++j) {
            double sums[3] = {0.0, 0.0, 0.0};
            for (std::size_t i = 0; i < users.size(); ++i)
                for (int m = 0; m < 3; ++m) sums[m] += cells[(i * ks.size() + j) * 3 + static_cast<std::size_t>(m)];
            const double n = users.empty() ? 1.0 : static_cast<double>(users.size());
            report.rows.push_back({model->name(), ks[j], sums[0] / n, sums[1] / n, sums[2] / n});
        }
    }
    return report;
}

double mean_average_precision(const Recommender& model, const RatingMatrix& held_out, std::size_t k, int threads) {
    const Recommender* models[] = {&model};
    const std::size_t ks[] = {k};
    return evaluate(models, held_out, ks, threads).rows.at(0).map;
}

void write_report(std::ostream& out, const MetricReport& report) {
    out << "model\tK\tprecision\trecall\tmap\n";
    char buf[128];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f", r.k, r.precision, r.recall, r.map);
        out << r.model << '\t' << buf << '\n';
    }
}

}  // namespace kgep
