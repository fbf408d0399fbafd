#pragma once

#include "kgep/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kgep {

// Planted-cluster dataset: users of cluster c interact with apps of cluster c
// with probability p_in and with every other app with probability p_out.
struct SyntheticSpec {
    int clusters = 2;
    int users_per_cluster = 100;
    int apps_per_cluster = 50;
    double p_in = 0.3;
    double p_out = 0.02;
    int vocabulary_per_cluster = 30;
    int readme_words = 40;
    int categories_per_cluster = 2;
    int providers_per_cluster = 3;
};

struct SyntheticDataset {
    std::vector<AppRecord> apps;
    std::vector<RatingRecord> ratings;
    std::vector<int> user_cluster;  // by user number
    std::vector<int> app_cluster;   // aligned with apps
};

// Throws std::invalid_argument when p_out >= p_in or a count is not positive.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Readme vocabulary of one cluster; disjoint across clusters and unchanged by
// the text preprocessor.
std::vector<std::string> cluster_vocabulary(int cluster, int size);

std::string synthetic_user_id(int n);
std::string synthetic_app_id(int n);

}  // namespace kgep
