#include "synplug/vocab.hpp"

namespace synplug {

Vocab::Vocab() {
  symbols_.push_back(kUnkSymbol);
  index_.emplace(kUnkSymbol, kUnkId);
}

int Vocab::add(const std::string& symbol) {
  if (symbol.empty()) throw ValidationError("vocab: empty symbol");
  auto it = index_.find(symbol);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(symbols_.size());
  symbols_.push_back(symbol);
  index_.emplace(symbol, id);
  return id;
}

int Vocab::lookup(const std::string& symbol) const {
  auto it = index_.find(symbol);
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocab::contains(const std::string& symbol) const { return index_.count(symbol) > 0; }

const std::string& Vocab::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size())
    throw ValidationError("vocab: id " + std::to_string(id) + " out of range");
  return symbols_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const std::string& s : symbols_) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;  // separator so ["ab","c"] != ["a","bc"]
    h *= 1099511628211ull;
  }
  return h;
}

Vocab Vocab::from_symbols(const std::vector<std::string>& symbols) {
  if (symbols.empty() || symbols[0] != kUnkSymbol)
    throw ValidationError("vocab: symbol list must start with " + std::string(kUnkSymbol));
  Vocab v;
  for (std::size_t i = 1; i < symbols.size(); ++i) v.add(symbols[i]);
  return v;
}

}  // namespace synplug
