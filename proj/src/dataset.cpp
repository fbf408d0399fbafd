#include "kgep/dataset.hpp"

#include "kgep/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace kgep {

namespace {

const std::vector<std::string> kAppColumns = {
    "app_id",        "category",    "provider",     "content_rating", "has_ads",    "is_free",
    "interactive_elements", "avg_rating", "install_count", "updated_date", "size_bytes", "readme_text"};
const std::vector<std::string> kRatingColumns = {"user_id", "app_id", "rating"};
const char* kGradeText[] = {"0.2", "0.4", "0.6", "0.8", "1.0"};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<bool> parse_bool(std::string_view s) {
    const auto v = lower(s);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    return std::nullopt;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<std::string> split_elements(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find(';', start);
        if (end == std::string_view::npos) end = s.size();
        auto item = s.substr(start, end - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) out.emplace_back(item);
        start = end + 1;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void check_header(csv::Reader& reader, const std::string& source, const std::vector<std::string>& expected) {
    auto header = reader.next();
    if (!header) throw DataError(source, 1, "header", "file is empty");
    if (*header != expected) {
        throw DataError(source, reader.line(), "header", "unexpected columns");
    }
}

}  // namespace

std::optional<Date> Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto y = parse_u64(text.substr(0, 4));
    auto m = parse_u64(text.substr(5, 2));
    auto d = parse_u64(text.substr(8, 2));
    if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1) return std::nullopt;
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const int year = static_cast<int>(*y);
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    const int max_day = kDays[*m - 1] + ((*m == 2 && leap) ? 1 : 0);
    if (static_cast<int>(*d) > max_day) return std::nullopt;
    return Date{year, static_cast<int>(*m), static_cast<int>(*d)};
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

double grade_from_stars(int stars) {
    if (stars < 1 || stars > 5) throw std::invalid_argument("star count must be in 1..5");
    return stars / 5.0;
}

std::optional<int> stars_from_grade(double grade) {
    for (int s = 1; s <= 5; ++s) {
        if (std::abs(grade - s / 5.0) <= 1e-9) return s;
    }
    return std::nullopt;
}

DataError::DataError(const std::string& file, std::size_t line, const std::string& field, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ": field '" + field + "': " + what),
      file_(file),
      line_(line),
      field_(field) {}

std::vector<AppRecord> parse_apps(std::istream& in, const std::string& source) {
    csv::Reader reader(in);
    check_header(reader, source, kAppColumns);

    std::vector<AppRecord> apps;
    std::unordered_set<std::string> seen;
    while (auto row = reader.next()) {
        const auto line = reader.line();
        if (row->size() == 1 && row->front().empty()) continue;
        if (row->size() != kAppColumns.size()) {
            throw DataError(source, line, "row", "expected " + std::to_string(kAppColumns.size()) +
                                                     " fields, found " + std::to_string(row->size()));
        }
        const auto& f = *row;
        auto fail = [&](std::size_t col, const std::string& why) -> DataError {
            return DataError(source, line, kAppColumns[col], why);
        };

        AppRecord app;
        app.app_id = f[0];
        if (app.app_id.empty()) throw fail(0, "empty app id");
        if (!seen.insert(app.app_id).second) throw fail(0, "duplicate app id '" + app.app_id + "'");
        app.category = f[1];
        app.provider = f[2];
        app.content_rating = f[3];
        auto ads = parse_bool(f[4]);
        if (!ads) throw fail(4, "not a boolean: '" + f[4] + "'");
        app.has_ads = *ads;
        auto free = parse_bool(f[5]);
        if (!free) throw fail(5, "not a boolean: '" + f[5] + "'");
        app.is_free = *free;
        app.interactive_elements = split_elements(f[6]);
        auto rating = parse_double(f[7]);
        if (!rating || *rating < 0.0 || *rating > 5.0) throw fail(7, "not a rating in [0,5]: '" + f[7] + "'");
        app.avg_rating = *rating;
        auto installs = parse_u64(f[8]);
        if (!installs) throw fail(8, "not a non-negative integer: '" + f[8] + "'");
        app.install_count = *installs;
        auto date = Date::parse(f[9]);
        if (!date) throw fail(9, "not an ISO-8601 date: '" + f[9] + "'");
        app.updated_date = *date;
        if (f[10] != "VARIES") {
            auto size = parse_u64(f[10]);
            if (!size) throw fail(10, "not an integer or VARIES: '" + f[10] + "'");
            app.size_bytes = *size;
        }
        app.readme_text = f[11];
        apps.push_back(std::move(app));
    }
    return apps;
}

std::vector<RatingRecord> parse_ratings(std::istream& in, const std::string& source,
                                        std::span<const std::string> known_apps,
                                        std::vector<SkipEntry>& skipped) {
    csv::Reader reader(in);
    check_header(reader, source, kRatingColumns);

    std::vector<RatingRecord> ratings;
    std::map<std::pair<std::string, std::string>, std::size_t> position;
    while (auto row = reader.next()) {
        const auto line = reader.line();
        if (row->size() == 1 && row->front().empty()) continue;
        if (row->size() != kRatingColumns.size()) {
            throw DataError(source, line, "row", "expected 3 fields, found " + std::to_string(row->size()));
        }
        auto& f = *row;
        if (f[0].empty()) throw DataError(source, line, "user_id", "empty user id");
        if (f[1].empty()) throw DataError(source, line, "app_id", "empty app id");
        auto value = parse_double(f[2]);
        if (!value) throw DataError(source, line, "rating", "not a number: '" + f[2] + "'");
        auto stars = stars_from_grade(*value);
        if (!stars) throw DataError(source, line, "rating", "not one of 0.2,0.4,0.6,0.8,1.0: '" + f[2] + "'");

        if (!std::binary_search(known_apps.begin(), known_apps.end(), f[1])) {
            skipped.push_back({source, line, "unknown app '" + f[1] + "'"});
            continue;
        }
        RatingRecord r{std::move(f[0]), std::move(f[1]), grade_from_stars(*stars)};
        auto key = std::make_pair(r.user_id, r.app_id);
        if (auto it = position.find(key); it != position.end()) {
            skipped.push_back({source, line, "duplicate rating for (" + r.user_id + ", " + r.app_id +
                                                 "); last occurrence kept"});
            ratings[it->second] = std::move(r);
        } else {
            position.emplace(std::move(key), ratings.size());
            ratings.push_back(std::move(r));
        }
    }
    return ratings;
}

Dataset load_dataset(const std::filesystem::path& apps_path, const std::filesystem::path& ratings_path) {
    std::ifstream apps_in(apps_path, std::ios::binary);
    if (!apps_in) throw std::runtime_error("cannot open " + apps_path.string());
    std::ifstream ratings_in(ratings_path, std::ios::binary);
    if (!ratings_in) throw std::runtime_error("cannot open " + ratings_path.string());

    Dataset ds;
    ds.apps = parse_apps(apps_in, apps_path.string());
    std::vector<std::string> ids;
    ids.reserve(ds.apps.size());
    for (const auto& a : ds.apps) ids.push_back(a.app_id);
    std::sort(ids.begin(), ids.end());
    ds.ratings = parse_ratings(ratings_in, ratings_path.string(), ids, ds.skipped);
    return ds;
}

void write_apps(std::ostream& out, std::span<const AppRecord> apps) {
    csv::write_row(out, kAppColumns);
    for (const auto& a : apps) {
        std::string elements;
        for (std::size_t i = 0; i < a.interactive_elements.size(); ++i) {
            if (i) elements += ';';
            elements += a.interactive_elements[i];
        }
        csv::write_row(out, {a.app_id, a.category, a.provider, a.content_rating, a.has_ads ? "true" : "false",
                             a.is_free ? "true" : "false", elements, format_double(a.avg_rating),
                             std::to_string(a.install_count), a.updated_date.to_string(),
                             a.size_bytes ? std::to_string(*a.size_bytes) : "VARIES", a.readme_text});
    }
}

void write_ratings(std::ostream& out, std::span<const RatingRecord> ratings) {
    csv::write_row(out, kRatingColumns);
    for (const auto& r : ratings) {
        auto stars = stars_from_grade(r.rating);
        if (!stars) throw std::invalid_argument("rating grade out of range for " + r.user_id + "/" + r.app_id);
        csv::write_row(out, {r.user_id, r.app_id, kGradeText[*stars - 1]});
    }
}

void write_dataset(const std::filesystem::path& apps_path, const std::filesystem::path& ratings_path,
                   std::span<const AppRecord> apps, std::span<const RatingRecord> ratings) {
    std::ofstream apps_out(apps_path, std::ios::binary);
    if (!apps_out) throw std::runtime_error("cannot write " + apps_path.string());
    write_apps(apps_out, apps);
    std::ofstream ratings_out(ratings_path, std::ios::binary);
    if (!ratings_out) throw std::runtime_error("cannot write " + ratings_path.string());
    write_ratings(ratings_out, ratings);
}

namespace {

struct PassResult {
    std::vector<AppRecord> apps;
    std::vector<RatingRecord> ratings;
};

PassResult cold_start_pass(std::span<const AppRecord> apps, std::span<const RatingRecord> ratings, int min_user,
                           int min_app) {
    std::unordered_map<std::string, std::unordered_set<std::string>> raters;
    for (const auto& r : ratings) raters[r.app_id].insert(r.user_id);

    std::unordered_set<std::string> kept_apps;
    PassResult out;
    for (const auto& a : apps) {
        auto it = raters.find(a.app_id);
        const std::size_t n = it == raters.end() ? 0 : it->second.size();
        if (n >= static_cast<std::size_t>(min_app)) {
            kept_apps.insert(a.app_id);
            out.apps.push_back(a);
        }
    }

    std::unordered_map<std::string, std::unordered_set<std::string>> rated;
    for (const auto& r : ratings) {
        if (kept_apps.count(r.app_id)) rated[r.user_id].insert(r.app_id);
    }
    for (const auto& r : ratings) {
        if (!kept_apps.count(r.app_id)) continue;
        if (rated[r.user_id].size() >= static_cast<std::size_t>(min_user)) out.ratings.push_back(r);
    }
    return out;
}

}  // namespace

ColdStartResult filter_cold_start(std::span<const AppRecord> apps, std::span<const RatingRecord> ratings,
                                  int min_user, int min_app) {
    if (min_user < 1 || min_app < 1) throw std::invalid_argument("cold-start thresholds must be >= 1");
    auto first = cold_start_pass(apps, ratings, min_user, min_app);
    if (first.ratings.empty()) throw std::runtime_error("dataset empty after cold-start filtering");
    auto second = cold_start_pass(first.apps, first.ratings, min_user, min_app);

    ColdStartResult result;
    result.stable = second.apps.size() == first.apps.size() && second.ratings.size() == first.ratings.size();
    result.apps = std::move(first.apps);
    result.ratings = std::move(first.ratings);
    return result;
}

}  // namespace kgep
