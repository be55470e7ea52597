#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/types.hpp"
#include "mcomp/rng.hpp"

namespace mcomp::harness {

/// Train/test split of a rating matrix. Rows are items, columns are users.
struct RatingsDataset {
  std::string name;
  SparseObservations train;
  SparseObservations test;
  double m_min = 0.0;
  double m_max = 0.0;
  /// Users dropped before sampling because they had fewer than 3 ratings.
  int users_excluded = 0;
};

namespace detail {

inline std::string_view trim_ws(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_number(std::string_view s, double& out) {
  s = trim_ws(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] inline void data_error(const std::string& file, std::size_t line, const std::string& what) {
  throw DataError(file + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

inline constexpr int kJesterJokes = 100;
inline constexpr double kJesterMissing = 99.0;

/// One Jester user: ratings in [-10, 10], NaN where the sheet holds 99.
using JesterRow = std::array<double, kJesterJokes>;

/// Jester CSV files in path: a single file, or every *.csv in a directory in
/// name order.
inline std::vector<std::filesystem::path> jester_files(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) return {path};
  if (!fs::is_directory(path, ec)) throw DataError("no Jester data at " + path.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(path))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no .csv files in " + path.string());
  return out;
}

/// Rows "count, r_1, ..., r_100" with 99 meaning missing.
inline std::vector<JesterRow> read_jester_rows(const std::filesystem::path& path) {
  std::vector<JesterRow> rows;
  for (const auto& file : jester_files(path)) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim_ws(line).empty()) continue;
      auto fields = detail::split(line, ',');
      if (fields.size() == kJesterJokes + 2 && detail::trim_ws(fields.back()).empty()) fields.pop_back();
      if (fields.size() != kJesterJokes + 1)
        detail::data_error(file.string(), lineno,
                           "expected " + std::to_string(kJesterJokes + 1) + " fields, found " +
                               std::to_string(fields.size()));
      double count = 0;
      if (!detail::parse_number(fields[0], count) || count < 0 || count != std::floor(count))
        detail::data_error(file.string(), lineno, "first field must be a rating count");
      JesterRow row;
      for (int j = 0; j < kJesterJokes; ++j) {
        double v = 0;
        if (!detail::parse_number(fields[static_cast<std::size_t>(j) + 1], v))
          detail::data_error(file.string(), lineno, "unparsable rating in field " + std::to_string(j + 2));
        if (v == kJesterMissing) {
          row[static_cast<std::size_t>(j)] = std::nan("");
        } else if (v < -10.0 || v > 10.0) {
          detail::data_error(file.string(), lineno, "rating outside [-10, 10]");
        } else {
          row[static_cast<std::size_t>(j)] = v;
        }
      }
      rows.push_back(row);
    }
  }
  if (rows.empty()) throw DataError("Jester data at " + path.string() + " has no rows");
  return rows;
}

/// Samples n_users users (0 = all) among those with at least 3 ratings and
/// holds out two random ratings per user as the test set.
inline RatingsDataset jester_split(const std::vector<JesterRow>& rows, int n_users,
                                   std::uint64_t seed) {
  std::vector<int> eligible;
  int excluded = 0;
  for (std::size_t u = 0; u < rows.size(); ++u) {
    int rated = 0;
    for (double v : rows[u]) rated += std::isnan(v) ? 0 : 1;
    if (rated >= 3) eligible.push_back(static_cast<int>(u));
    else ++excluded;
  }
  if (n_users < 0) throw DataError("n_users must be nonnegative");
  const std::size_t want = n_users == 0 ? eligible.size() : static_cast<std::size_t>(n_users);
  if (want == 0 || want > eligible.size())
    throw DataError("requested " + std::to_string(want) + " users but only " +
                    std::to_string(eligible.size()) + " have at least 3 ratings");

  Rng pick(derive_seed(seed, "jester_users"));
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, eligible.size() - 1);
    std::swap(eligible[i], eligible[d(pick)]);
  }
  eligible.resize(want);
  std::sort(eligible.begin(), eligible.end());

  Rng hold(derive_seed(seed, "jester_test"));
  std::vector<Observation> train, test;
  for (std::size_t c = 0; c < eligible.size(); ++c) {
    const auto& row = rows[static_cast<std::size_t>(eligible[c])];
    std::vector<int> rated;
    for (int j = 0; j < kJesterJokes; ++j)
      if (!std::isnan(row[static_cast<std::size_t>(j)])) rated.push_back(j);
    for (std::size_t i = 0; i < 2; ++i) {
      std::uniform_int_distribution<std::size_t> d(i, rated.size() - 1);
      std::swap(rated[i], rated[d(hold)]);
    }
    const int col = static_cast<int>(c);
    for (std::size_t i = 0; i < rated.size(); ++i) {
      const Observation o{rated[i], col, row[static_cast<std::size_t>(rated[i])]};
      (i < 2 ? test : train).push_back(o);
    }
  }
  RatingsDataset ds;
  ds.name = "jester";
  const int cols = static_cast<int>(eligible.size());
  ds.train = SparseObservations(kJesterJokes, cols, std::move(train));
  ds.test = SparseObservations(kJesterJokes, cols, std::move(test));
  ds.m_min = -10.0;
  ds.m_max = 10.0;
  ds.users_excluded = excluded;
  return ds;
}

inline RatingsDataset load_jester(const std::filesystem::path& path, int n_users,
                                  std::uint64_t seed) {
  return jester_split(read_jester_rows(path), n_users, seed);
}

/// Users with all 100 jokes rated, as a users x jokes matrix.
inline DenseMatrix jester_complete_submatrix(const std::vector<JesterRow>& rows) {
  std::vector<std::size_t> complete;
  for (std::size_t u = 0; u < rows.size(); ++u)
    if (std::none_of(rows[u].begin(), rows[u].end(), [](double v) { return std::isnan(v); }))
      complete.push_back(u);
  if (complete.empty()) throw DataError("no Jester user rated every joke");
  DenseMatrix out(static_cast<Eigen::Index>(complete.size()), kJesterJokes);
  for (std::size_t i = 0; i < complete.size(); ++i)
    for (int j = 0; j < kJesterJokes; ++j)
      out(static_cast<Eigen::Index>(i), j) = rows[complete[i]][static_cast<std::size_t>(j)];
  return out;
}

namespace detail {

struct RawRating {
  int user;
  int item;
  double value;
};

inline std::vector<RawRating> read_movielens_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<RawRating> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_ws(line).empty()) continue;
    const auto f = split_ws(line);
    if (f.size() != 4) data_error(file.string(), lineno, "expected 'user item rating timestamp'");
    double user = 0, item = 0, rating = 0, stamp = 0;
    if (!parse_number(f[0], user) || !parse_number(f[1], item) || !parse_number(f[2], rating) ||
        !parse_number(f[3], stamp))
      data_error(file.string(), lineno, "unparsable field");
    if (user < 1 || item < 1 || user != std::floor(user) || item != std::floor(item) ||
        user > 1e9 || item > 1e9)
      data_error(file.string(), lineno, "user and item ids must be positive integers");
    if (rating < 1.0 || rating > 5.0) data_error(file.string(), lineno, "rating outside [1, 5]");
    out.push_back({static_cast<int>(user) - 1, static_cast<int>(item) - 1, rating});
  }
  if (out.empty()) throw DataError(file.string() + " has no ratings");
  return out;
}

inline SparseObservations ratings_to_observations(const std::vector<RawRating>& raw, int items,
                                                  int users, const std::string& file) {
  std::vector<Observation> obs;
  obs.reserve(raw.size());
  for (const auto& r : raw) obs.push_back({r.item, r.user, r.value});
  try {
    return SparseObservations(items, users, std::move(obs));
  } catch (const InvalidArgument& e) {
    throw DataError(file + ": " + e.what());
  }
}

}  // namespace detail

/// MovieLens splits as tab-separated "user item rating timestamp" lines.
inline RatingsDataset load_movielens(const std::filesystem::path& base_path,
                                     const std::filesystem::path& test_path) {
  const auto base = detail::read_movielens_file(base_path);
  const auto test = detail::read_movielens_file(test_path);
  int users = 0, items = 0;
  for (const auto* part : {&base, &test})
    for (const auto& r : *part) {
      users = std::max(users, r.user + 1);
      items = std::max(items, r.item + 1);
    }
  RatingsDataset ds;
  ds.name = "movielens";
  ds.train = detail::ratings_to_observations(base, items, users, base_path.string());
  ds.test = detail::ratings_to_observations(test, items, users, test_path.string());
  const auto train_cells = ds.train.cells();
  for (const auto& o : ds.test.entries())
    if (std::binary_search(train_cells.begin(), train_cells.end(), Cell{o.row, o.col}))
      throw DataError("user " + std::to_string(o.col + 1) + ", item " + std::to_string(o.row + 1) +
                      " appears in both " + base_path.string() + " and " + test_path.string());
  ds.m_min = 1.0;
  ds.m_max = 5.0;
  return ds;
}

/// u1.base and u1.test inside dir.
inline RatingsDataset load_movielens(const std::filesystem::path& dir) {
  return load_movielens(dir / "u1.base", dir / "u1.test");
}

}  // namespace mcomp::harness
