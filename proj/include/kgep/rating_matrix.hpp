#pragma once

#include "kgep/dataset.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kgep {

// Sparse user x app grades. Users and apps are sorted by id; absent cells are 0.
class RatingMatrix {
public:
    struct Entry {
        std::uint32_t app;
        double rating;
        bool operator==(const Entry&) const = default;
    };

    RatingMatrix() = default;
    // Rows must be sorted by app index and reference valid apps.
    RatingMatrix(std::vector<std::string> users, std::vector<std::string> apps,
                 std::vector<std::vector<Entry>> rows);

    std::size_t user_count() const { return users_.size(); }
    std::size_t app_count() const { return apps_.size(); }
    const std::vector<std::string>& users() const { return users_; }
    const std::vector<std::string>& apps() const { return apps_; }

    std::span<const Entry> row(std::uint32_t user) const { return rows_.at(user); }
    double value(std::uint32_t user, std::uint32_t app) const;
    bool contains(std::uint32_t user, std::uint32_t app) const { return value(user, app) != 0.0; }

    std::optional<std::uint32_t> user_index(std::string_view id) const;
    std::optional<std::uint32_t> app_index(std::string_view id) const;

    std::size_t nnz() const;
    // Fraction of observed cells, |entries| / (|users| * |apps|).
    double sparsity() const;

    // Same index space, different entries.
    RatingMatrix with_rows(std::vector<std::vector<Entry>> rows) const;

    bool operator==(const RatingMatrix&) const = default;

private:
    std::vector<std::string> users_;
    std::vector<std::string> apps_;
    std::vector<std::vector<Entry>> rows_;
};

// Throws std::invalid_argument on a repeated (user, app) pair.
RatingMatrix build_rating_matrix(std::span<const RatingRecord> ratings);

// The training partition of an interaction split. Graph construction and model
// training accept only this type, so held-out interactions cannot leak in.
class TrainingMatrix {
public:
    TrainingMatrix() = default;
    explicit TrainingMatrix(RatingMatrix m) : matrix_(std::move(m)) {}
    const RatingMatrix& matrix() const { return matrix_; }

private:
    RatingMatrix matrix_;
};

}  // namespace kgep
