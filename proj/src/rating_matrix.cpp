#include "kgep/rating_matrix.hpp"

#include <algorithm>
#include <stdexcept>

namespace kgep {

RatingMatrix::RatingMatrix(std::vector<std::string> users, std::vector<std::string> apps,
                           std::vector<std::vector<Entry>> rows)
    : users_(std::move(users)), apps_(std::move(apps)), rows_(std::move(rows)) {
    if (rows_.size() != users_.size()) throw std::invalid_argument("rating matrix: row count != user count");
    for (const auto& r : rows_) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i].app >= apps_.size()) throw std::invalid_argument("rating matrix: app index out of range");
            if (i && r[i - 1].app >= r[i].app) throw std::invalid_argument("rating matrix: row not sorted");
        }
    }
}

double RatingMatrix::value(std::uint32_t user, std::uint32_t app) const {
    const auto& r = rows_.at(user);
    auto it = std::lower_bound(r.begin(), r.end(), app, [](const Entry& e, std::uint32_t a) { return e.app < a; });
    return (it != r.end() && it->app == app) ? it->rating : 0.0;
}

std::optional<std::uint32_t> RatingMatrix::user_index(std::string_view id) const {
    auto it = std::lower_bound(users_.begin(), users_.end(), id);
    if (it == users_.end() || *it != id) return std::nullopt;
    return static_cast<std::uint32_t>(it - users_.begin());
}

std::optional<std::uint32_t> RatingMatrix::app_index(std::string_view id) const {
    auto it = std::lower_bound(apps_.begin(), apps_.end(), id);
    if (it == apps_.end() || *it != id) return std::nullopt;
    return static_cast<std::uint32_t>(it - apps_.begin());
}

std::size_t RatingMatrix::nnz() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
}

double RatingMatrix::sparsity() const {
    if (users_.empty() || apps_.empty()) return 0.0;
    return static_cast<double>(nnz()) / (static_cast<double>(users_.size()) * static_cast<double>(apps_.size()));
}

RatingMatrix RatingMatrix::with_rows(std::vector<std::vector<Entry>> rows) const {
    return RatingMatrix(users_, apps_, std::move(rows));
}

RatingMatrix build_rating_matrix(std::span<const RatingRecord> ratings) {
    std::vector<std::string> users, apps;
    for (const auto& r : ratings) {
        users.push_back(r.user_id);
        apps.push_back(r.app_id);
    }
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    std::sort(apps.begin(), apps.end());
    apps.erase(std::unique(apps.begin(), apps.end()), apps.end());

    auto index_of = [](const std::vector<std::string>& v, const std::string& id) {
        return static_cast<std::uint32_t>(std::lower_bound(v.begin(), v.end(), id) - v.begin());
    };
    std::vector<std::vector<RatingMatrix::Entry>> rows(users.size());
    for (const auto& r : ratings) rows[index_of(users, r.user_id)].push_back({index_of(apps, r.app_id), r.rating});
    for (std::size_t u = 0; u < rows.size(); ++u) {
        auto& row = rows[u];
        std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.app < b.app; });
        for (std::size_t i = 1; i < row.size(); ++i) {
            if (row[i].app == row[i - 1].app) {
                throw std::invalid_argument("duplicate rating for (" + users[u] + ", " + apps[row[i].app] + ")");
            }
        }
    }
    return RatingMatrix(std::move(users), std::move(apps), std::move(rows));
}

}  // namespace kgep
