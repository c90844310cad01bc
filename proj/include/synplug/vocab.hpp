#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "synplug/errors.hpp"

namespace synplug {

inline constexpr int kUnkId = 0;
inline const char* const kUnkSymbol = "<unk>";
inline const char* const kSepSymbol = "<sep>";
inline const char* const kBosSymbol = "<bos>";

// Symbol <-> contiguous id. Id 0 is always the reserved UNK; lookups of
// unseen symbols map there. Insertion order is the id order, which keeps
// vocabularies deterministic for a fixed input stream.
class Vocab {
 public:
  Vocab();

  int add(const std::string& symbol);          // returns existing id if known
  int lookup(const std::string& symbol) const;  // kUnkId if unknown
  bool contains(const std::string& symbol) const;

  const std::string& symbol(int id) const;
  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  // FNV-1a over all symbols; used to pin checkpoints to their vocabularies.
  std::uint64_t hash() const;

  static Vocab from_symbols(const std::vector<std::string>& symbols);  // must start with UNK

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace synplug
