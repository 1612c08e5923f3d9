#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biossl/pretext.hpp"

namespace biossl {

// One row of the task catalogue: the six single tasks plus the fifteen
// published combinations.
struct ComboEntry {
  std::string id;    // "T1".."T6" for singles, "C1".."C15" for combinations
  std::string name;  // tasks joined with '-'
  std::vector<TaskKind> tasks;
  std::string tag;  // locality tag such as "L-G"
  int modal_size = 1;

  bool single() const { return tasks.size() == 1; }
};

const std::vector<ComboEntry>& combo_catalogue();

// Lookup by id or by name (case-insensitive). A name listing the tasks of a
// catalogue entry in another order also matches.
std::optional<ComboEntry> find_combo(std::string_view key);

// Number of distinct modalities among the tasks.
int modality_count(const std::vector<TaskKind>& tasks);

std::string combo_name(const std::vector<TaskKind>& tasks);

}  // namespace biossl
