#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace linprobit {

struct Observation {
  int user = 0;
  int item = 0;
  int response = 0;  ///< +1 or -1

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Dense-index map between original string IDs and 0-based indices, in
/// first-appearance order.
class IdMap {
 public:
  /// Index of `id`, inserting it when absent.
  int intern(const std::string& id);
  /// Index of `id` or -1.
  int find(const std::string& id) const;
  const std::string& id(int index) const { return ids_.at(static_cast<std::size_t>(index)); }
  int size() const noexcept { return static_cast<int>(ids_.size()); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
};

/// Sparse binary response matrix: (user, item, +-1) triples without
/// duplicate pairs, indices dense in [0, num_users) x [0, num_items).
class ResponseSet {
 public:
  ResponseSet() = default;

  /// Builds from dense indices; users/items default to "0", "1", ... IDs.
  /// Throws DataError on out-of-range indices, duplicates or bad responses.
  ResponseSet(std::vector<Observation> observations, int num_users, int num_items);

  /// Builds with explicit ID maps.
  ResponseSet(std::vector<Observation> observations, IdMap users, IdMap items);

  const std::vector<Observation>& observations() const noexcept { return observations_; }
  std::size_t size() const noexcept { return observations_.size(); }
  bool empty() const noexcept { return observations_.empty(); }
  int num_users() const noexcept { return users_.size(); }
  int num_items() const noexcept { return items_.size(); }
  const IdMap& users() const noexcept { return users_; }
  const IdMap& items() const noexcept { return items_; }

  /// Full U x Q response set in user-major order (for tests and simulation).
  static ResponseSet from_matrix(const std::vector<std::vector<int>>& responses);

  /// Subset of observations by position; ID maps and dimensions unchanged.
  ResponseSet subset(const std::vector<std::size_t>& positions) const;

  friend bool operator==(const ResponseSet& a, const ResponseSet& b) {
    return a.observations_ == b.observations_ && a.users_ == b.users_ && a.items_ == b.items_;
  }

 private:
  void validate() const;

  std::vector<Observation> observations_;
  IdMap users_;
  IdMap items_;
};

enum class LabelConvention { pm_one, zero_one };

/// Reads a headered CSV `user,item,response`. IDs are arbitrary strings,
/// densified in first-appearance order. With zero_one, 0 -> -1 and 1 -> +1.
/// Errors carry the offending line number.
ResponseSet load_triplets(const std::filesystem::path& path, LabelConvention convention);

/// Writes the same format with +-1 labels.
void save_triplets(const std::filesystem::path& path, const ResponseSet& responses);

struct RawRating {
  std::string user;
  std::string item;
  int rating = 0;
  std::int64_t timestamp = 0;
};

/// Parses MovieLens `u.data`: user, item, rating (1-5), timestamp separated by
/// tabs (any whitespace is accepted).
std::vector<RawRating> load_movielens(const std::filesystem::path& path);

struct BinarizeReport {
  double mean_rating = 0.0;
  std::size_t input_rows = 0;
  std::size_t dropped_ties = 0;
};

/// +1 above the global mean rating, -1 below, ties dropped.
ResponseSet binarize_ratings(const std::vector<RawRating>& ratings, BinarizeReport* report = nullptr);

}  // namespace linprobit
