#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgep {

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    // Parses YYYY-MM-DD; nullopt when the string is not a valid calendar date.
    static std::optional<Date> parse(std::string_view text);
    std::string to_string() const;
    int quarter() const { return (month - 1) / 3 + 1; }
    auto operator<=>(const Date&) const = default;
};

struct AppRecord {
    std::string app_id;
    std::string category;
    std::string provider;
    std::string content_rating;
    bool has_ads = false;
    bool is_free = true;
    std::vector<std::string> interactive_elements;
    double avg_rating = 0.0;
    std::uint64_t install_count = 0;
    Date updated_date;
    std::optional<std::uint64_t> size_bytes;  // nullopt: "Varies with device"
    std::string readme_text;

    bool operator==(const AppRecord&) const = default;
};

struct RatingRecord {
    std::string user_id;
    std::string app_id;
    double rating = 0.0;  // one of 0.2, 0.4, 0.6, 0.8, 1.0

    bool operator==(const RatingRecord&) const = default;
};

// Maps a star count 1..5 to its grade s/5. Throws for counts outside 1..5.
double grade_from_stars(int stars);
// Returns the star count for a grade within 1e-9 of s/5, nullopt otherwise.
std::optional<int> stars_from_grade(double grade);

struct SkipEntry {
    std::string file;
    std::size_t line = 0;
    std::string reason;
};

struct Dataset {
    std::vector<AppRecord> apps;
    std::vector<RatingRecord> ratings;
    std::vector<SkipEntry> skipped;
};

// Malformed input. The message names file, line and field.
class DataError : public std::runtime_error {
public:
    DataError(const std::string& file, std::size_t line, const std::string& field, const std::string& what);

    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::string file_;
    std::size_t line_;
    std::string field_;
};

std::vector<AppRecord> parse_apps(std::istream& in, const std::string& source_name);

// Ratings naming an app outside `known_apps` (sorted) are skipped and reported;
// a repeated (user, app) pair keeps the last occurrence and is also reported.
std::vector<RatingRecord> parse_ratings(std::istream& in, const std::string& source_name,
                                        std::span<const std::string> known_apps,
                                        std::vector<SkipEntry>& skipped);

Dataset load_dataset(const std::filesystem::path& apps_path, const std::filesystem::path& ratings_path);

void write_apps(std::ostream& out, std::span<const AppRecord> apps);
void write_ratings(std::ostream& out, std::span<const RatingRecord> ratings);
void write_dataset(const std::filesystem::path& apps_path, const std::filesystem::path& ratings_path,
                   std::span<const AppRecord> apps, std::span<const RatingRecord> ratings);

struct ColdStartResult {
    std::vector<AppRecord> apps;
    std::vector<RatingRecord> ratings;
    // False when applying the same two passes again would remove more rows.
    bool stable = true;
};

// Drops apps with fewer than min_app distinct raters, then users with fewer
// than min_user remaining apps. Exactly one pass of each, in that order.
ColdStartResult filter_cold_start(std::span<const AppRecord> apps, std::span<const RatingRecord> ratings,
                                  int min_user, int min_app);

}  // namespace kgep
