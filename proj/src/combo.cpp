#include "biossl/combo.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace biossl {

namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

ComboEntry entry(std::string id, std::vector<TaskKind> tasks, std::string tag, int modal) {
  return ComboEntry{std::move(id), combo_name(tasks), std::move(tasks), std::move(tag), modal};
}

std::vector<ComboEntry> build_catalogue() {
  using K = TaskKind;
  std::vector<ComboEntry> c;
  for (std::size_t k = 0; k < kAllTasks.size(); ++k) {
    const TaskKind t = kAllTasks[k];
    c.push_back(entry("T" + std::to_string(k + 1), {t}, std::string(1, locality_letter(locality_of(t))), 1));
  }
  c.push_back(entry("C1", {K::EdgeMask, K::PairDistance}, "L-G", 2));
  c.push_back(entry("C2", {K::ClusterPre, K::PathClass}, "L-G", 2));
  c.push_back(entry("C3", {K::ClusterPre, K::PairDistance}, "L-G", 1));
  c.push_back(entry("C4", {K::EdgeMask, K::PathClass}, "L-G", 1));
  c.push_back(entry("C5", {K::PairDistance, K::PathClass}, "G-G", 2));
  c.push_back(entry("C6", {K::PathClass, K::SimCon}, "G-W", 2));
  c.push_back(entry("C7", {K::PairDistance, K::SimCon}, "G-W", 2));
  c.push_back(entry("C8", {K::EdgeMask, K::SimReg}, "L-S", 2));
  c.push_back(entry("C9", {K::PairDistance, K::SimReg}, "L-S", 2));
  c.push_back(entry("C10", {K::ClusterPre, K::EdgeMask}, "L-L", 2));
  c.push_back(entry("C11", {K::SimReg, K::SimCon}, "S-W", 1));
  c.push_back(entry("C12", {K::ClusterPre, K::PairDistance, K::PathClass}, "L-G-G", 2));
  c.push_back(entry("C13", {K::ClusterPre, K::PathClass, K::SimReg}, "L-G-S", 3));
  c.push_back(entry("C14", {K::PairDistance, K::SimReg, K::SimCon}, "G-S-W", 2));
  c.push_back(entry("C15", {K::PairDistance, K::EdgeMask, K::SimCon}, "G-L-W", 3));
  return c;
}

}  // namespace

std::string combo_name(const std::vector<TaskKind>& tasks) {
  std::string name;
  for (TaskKind t : tasks) {
    if (!name.empty()) name.push_back('-');
    name += to_string(t);
  }
  return name;
}

int modality_count(const std::vector<TaskKind>& tasks) {
  std::set<Modality> m;
  for (TaskKind t : tasks) m.insert(modality_of(t));
  return static_cast<int>(m.size());
}

const std::vector<ComboEntry>& combo_catalogue() {
  static const std::vector<ComboEntry> catalogue = build_catalogue();
  return catalogue;
}

std::optional<ComboEntry> find_combo(std::string_view key) {
  const std::string k = lower(key);
  for (const ComboEntry& e : combo_catalogue()) {
    if (lower(e.id) == k || lower(e.name) == k) return e;
  }
  std::vector<TaskKind> wanted;
  std::size_t start = 0;
  const std::string text(key);
  while (start <= text.size()) {
    const std::size_t dash = text.find('-', start);
    const std::string part = text.substr(start, dash == std::string::npos ? std::string::npos : dash - start);
    const auto t = parse_task_kind(part);
    if (!t) return std::nullopt;
    wanted.push_back(*t);
    if (dash == std::string::npos) break;
    start = dash + 1;
  }
  std::sort(wanted.begin(), wanted.end());
  for (const ComboEntry& e : combo_catalogue()) {
    auto have = e.tasks;
    std::sort(have.begin(), have.end());
    if (have == wanted) return e;
  }
  return std::nullopt;
}

}  // namespace biossl
