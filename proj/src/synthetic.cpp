#include "kgep/synthetic.hpp"

#include "kgep/rng.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace kgep {

namespace {

// Consonants and vowels chosen so no Porter suffix rule applies to the words.
constexpr std::string_view kConsonants = "bdfgkmnprz";
constexpr std::string_view kVowels = "aio";

std::string syllable(int i) {
    return {kConsonants[static_cast<std::size_t>(i) / kVowels.size()], kVowels[static_cast<std::size_t>(i) % kVowels.size()]};
}

std::string padded(const char* prefix, int n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%05d", prefix, n);
    return buf;
}

}  // namespace

std::string synthetic_user_id(int n) { return padded("user", n); }
std::string synthetic_app_id(int n) { return padded("app", n); }

std::vector<std::string> cluster_vocabulary(int cluster, int size) {
    constexpr int s = static_cast<int>(kConsonants.size() * kVowels.size());
    if (size < 0 || static_cast<long>(cluster + 1) * size > static_cast<long>(s) * s * s) {
        throw std::invalid_argument("synthetic vocabulary too large");
    }
    std::vector<std::string> words;
    for (int i = 0; i < size; ++i) {
        const int g = cluster * size + i;
        words.push_back(syllable(g / (s * s)) + syllable((g / s) % s) + syllable(g % s));
    }
    return words;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (!(spec.p_in >= 0.0 && spec.p_in <= 1.0 && spec.p_out >= 0.0)) {
        throw std::invalid_argument("synthetic: probabilities must lie in [0, 1]");
    }
    if (spec.p_out >= spec.p_in) throw std::invalid_argument("synthetic: p_out must be smaller than p_in");
    if (spec.clusters < 1 || spec.users_per_cluster < 1 || spec.apps_per_cluster < 1 ||
        spec.vocabulary_per_cluster < 1 || spec.readme_words < 1 || spec.categories_per_cluster < 1 ||
        spec.providers_per_cluster < 1) {
        throw std::invalid_argument("synthetic: counts must be positive");
    }

    static const char* kContentRatings[] = {"Everyone", "Teen", "Mature 17+"};
    static const char* kElements[] = {"Digital Purchases", "Shares Info", "Shares Location", "Users Interact"};

    Rng rng(seed);
    SyntheticDataset out;
    int app_no = 0;
    for (int c = 0; c < spec.clusters; ++c) {
        const auto vocab = cluster_vocabulary(c, spec.vocabulary_per_cluster);
        for (int j = 0; j < spec.apps_per_cluster; ++j) {
            AppRecord a;
            a.app_id = synthetic_app_id(++app_no);
            a.category = "category-" + std::to_string(c) + "-" + std::to_string(rng.index(static_cast<std::size_t>(spec.categories_per_cluster)));
            a.provider = "provider-" + std::to_string(c) + "-" + std::to_string(rng.index(static_cast<std::size_t>(spec.providers_per_cluster)));
            a.content_rating = kContentRatings[rng.index(3)];
            a.has_ads = rng.bernoulli(0.5);
            a.is_free = rng.bernoulli(0.8);
            for (const char* e : kElements)
                if (rng.bernoulli(0.3)) a.interactive_elements.emplace_back(e);
            a.avg_rating = std::round(rng.uniform(3.0, 5.0) * 10.0) / 10.0;
            a.install_count = static_cast<std::uint64_t>(std::pow(10.0, rng.uniform(2.0, 7.0)));
            a.updated_date = {2018 + static_cast<int>(rng.index(3)), 1 + static_cast<int>(rng.index(12)),
                              1 + static_cast<int>(rng.index(28))};
            if (!rng.bernoulli(0.1)) a.size_bytes = static_cast<std::uint64_t>(rng.uniform(1.0, 100.0) * 1048576.0);
            for (int w = 0; w < spec.readme_words; ++w) {
                if (w) a.readme_text += ' ';
                a.readme_text += vocab[rng.index(vocab.size())];
            }
            out.apps.push_back(std::move(a));
            out.app_cluster.push_back(c);
        }
    }

    int user_no = 0;
    for (int c = 0; c < spec.clusters; ++c) {
        for (int i = 0; i < spec.users_per_cluster; ++i) {
            const auto user = synthetic_user_id(++user_no);
            out.user_cluster.push_back(c);
            for (std::size_t a = 0; a < out.apps.size(); ++a) {
                const bool in = out.app_cluster[a] == c;
                if (!rng.bernoulli(in ? spec.p_in : spec.p_out)) continue;
                const int stars = in ? 3 + static_cast<int>(rng.index(3)) : 1 + static_cast<int>(rng.index(3));
                out.ratings.push_back({user, out.apps[a].app_id, grade_from_stars(stars)});
            }
        }
    }
    return out;
}

}  // namespace kgep
