#include "linprobit/data.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "linprobit/errors.hpp"

namespace linprobit {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

IdMap numbered_ids(int n) {
  IdMap map;
  for (int i = 0; i < n; ++i) map.intern(std::to_string(i));
  return map;
}

}  // namespace

int IdMap::intern(const std::string& id) {
  const auto [it, inserted] = index_.try_emplace(id, static_cast<int>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

int IdMap::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

ResponseSet::ResponseSet(std::vector<Observation> observations, int num_users, int num_items)
    : ResponseSet(std::move(observations), numbered_ids(num_users), numbered_ids(num_items)) {}

ResponseSet::ResponseSet(std::vector<Observation> observations, IdMap users, IdMap items)
    : observations_(std::move(observations)), users_(std::move(users)), items_(std::move(items)) {
  validate();
}

void ResponseSet::validate() const {
  std::set<std::pair<int, int>> seen;
  for (const Observation& o : observations_) {
    if (o.user < 0 || o.user >= num_users() || o.item < 0 || o.item >= num_items())
      throw DataError("observation index out of range: (" + std::to_string(o.user) + ", " +
                      std::to_string(o.item) + ")");
    if (o.response != 1 && o.response != -1)
      throw DataError("response must be +1 or -1, got " + std::to_string(o.response));
    if (!seen.emplace(o.user, o.item).second)
      throw DataError("duplicate response for pair (" + users_.id(o.user) + ", " + items_.id(o.item) + ")");
  }
}

ResponseSet ResponseSet::from_matrix(const std::vector<std::vector<int>>& responses) {
  const int users = static_cast<int>(responses.size());
  const int items = users == 0 ? 0 : static_cast<int>(responses.front().size());
  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(users) * static_cast<std::size_t>(items));
  for (int u = 0; u < users; ++u) {
    if (static_cast<int>(responses[u].size()) != items) throw DataError("response matrix rows differ in length");
    for (int i = 0; i < items; ++i) obs.push_back({u, i, responses[u][i]});
  }
  return ResponseSet(std::move(obs), users, items);
}

ResponseSet ResponseSet::subset(const std::vector<std::size_t>& positions) const {
  std::vector<Observation> obs;
  obs.reserve(positions.size());
  for (std::size_t p : positions) obs.push_back(observations_.at(p));
  return ResponseSet(std::move(obs), users_, items_);
}

ResponseSet load_triplets(const std::filesystem::path& path, LabelConvention convention) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file (missing header)");
  ++line_no;
  const auto header = split_csv(line);
  if (header.size() != 3 || header[0] != "user" || header[1] != "item" || header[2] != "response")
    throw DataError(at_line(path, line_no) + "expected header 'user,item,response'");

  IdMap users, items;
  std::vector<Observation> obs;
  std::set<std::pair<int, int>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty())
      throw DataError(at_line(path, line_no) + "malformed row '" + line + "'");
    int response = 0;
    if (convention == LabelConvention::zero_one) {
      if (f[2] == "0") response = -1;
      else if (f[2] == "1") response = 1;
    } else {
      if (f[2] == "-1") response = -1;
      else if (f[2] == "1" || f[2] == "+1") response = 1;
    }
    if (response == 0) throw DataError(at_line(path, line_no) + "unknown response value '" + f[2] + "'");
    const int u = users.intern(f[0]);
    const int i = items.intern(f[1]);
    if (!seen.emplace(u, i).second)
      throw DataError(at_line(path, line_no) + "duplicate response for pair (" + f[0] + ", " + f[1] + ")");
    obs.push_back({u, i, response});
  }
  return ResponseSet(std::move(obs), std::move(users), std::move(items));
}

void save_triplets(const std::filesystem::path& path, const ResponseSet& responses) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "user,item,response\n";
  for (const Observation& o : responses.observations())
    out << responses.users().id(o.user) << ',' << responses.items().id(o.item) << ',' << o.response << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<RawRating> load_movielens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<RawRating> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    RawRating r;
    std::string extra;
    if (!(ss >> r.user >> r.item >> r.rating >> r.timestamp) || (ss >> extra))
      throw DataError(at_line(path, line_no) + "expected 'user item rating timestamp'");
    if (r.rating < 1 || r.rating > 5)
      throw DataError(at_line(path, line_no) + "rating " + std::to_string(r.rating) + " outside 1-5");
    out.push_back(std::move(r));
  }
  return out;
}

ResponseSet binarize_ratings(const std::vector<RawRating>& ratings, BinarizeReport* report) {
  if (ratings.empty()) throw DataError("binarize_ratings: no ratings");
  long double sum = 0.0L;
  for (const RawRating& r : ratings) sum += r.rating;
  const double mean = static_cast<double>(sum / static_cast<long double>(ratings.size()));

  IdMap users, items;
  std::vector<Observation> obs;
  std::size_t ties = 0;
  for (const RawRating& r : ratings) {
    const double v = r.rating;
    if (v == mean) {
      ++ties;
      continue;
    }
    obs.push_back({users.intern(r.user), items.intern(r.item), v > mean ? 1 : -1});
  }
  if (obs.empty()) std::cerr << "warning: every rating equals the mean rating; binarized set is empty\n";
  if (report) *report = {mean, ratings.size(), ties};
  return ResponseSet(std::move(obs), std::move(users), std::move(items));
}

}  // namespace linprobit
