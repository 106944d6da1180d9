#pragma once

// Amino-acid sequences, substitution bookkeeping against a parental sequence,
// and fixed per-residue encodings (one-hot, substitution-matrix rows).

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "abbo/error.hpp"

#ifndef ABBO_DATA_DIR
#define ABBO_DATA_DIR "data"
#endif

namespace abbo {

inline constexpr std::size_t kAlphabetSize = 20;

/// Canonical residue order. Index 0 is alanine.
inline constexpr std::string_view kAlphabet = "ARNDCQEGHILKMFPSTWYV";

namespace detail {
constexpr std::array<int, 256> makeResidueLookup() {
  std::array<int, 256> table{};
  for (auto& v : table) v = -1;
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) {
    table[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
  }
  return table;
}
inline constexpr std::array<int, 256> kResidueLookup = makeResidueLookup();
}  // namespace detail

/// Index of `residue` in kAlphabet, or -1 when it is not one of the 20
/// canonical codes.
constexpr int residueIndex(char residue) noexcept {
  return detail::kResidueLookup[static_cast<unsigned char>(residue)];
}

constexpr bool isCanonical(char residue) noexcept { return residueIndex(residue) >= 0; }

inline char residueAt(std::size_t index) {
  if (index >= kAlphabetSize) throw InvalidArgument("residue index out of range");
  return kAlphabet[index];
}

/// Fixed-length string over the canonical alphabet. Immutable.
class Sequence {
 public:
  Sequence() = default;

  explicit Sequence(std::string residues) : residues_(std::move(residues)) {
    for (std::size_t i = 0; i < residues_.size(); ++i) {
      if (!isCanonical(residues_[i])) {
        throw InvalidArgument("non-canonical residue '" + std::string(1, residues_[i]) +
                              "' at position " + std::to_string(i));
      }
    }
  }

  std::size_t size() const noexcept { return residues_.size(); }
  bool empty() const noexcept { return residues_.empty(); }
  char operator[](std::size_t i) const noexcept { return residues_[i]; }
  int index(std::size_t i) const noexcept { return residueIndex(residues_[i]); }
  const std::string& str() const noexcept { return residues_; }

  friend bool operator==(const Sequence&, const Sequence&) = default;
  friend auto operator<=>(const Sequence&, const Sequence&) = default;

 private:
  std::string residues_;
};

struct SequenceHash {
  std::size_t operator()(const Sequence& s) const noexcept {
    return std::hash<std::string>{}(s.str());
  }
};

inline std::size_t hamming(const Sequence& a, const Sequence& b) {
  if (a.size() != b.size()) throw InvalidArgument("hamming: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

/// Returns a copy of `seq` with `position` replaced by `to`.
inline Sequence mutate(const Sequence& seq, std::size_t position, char to) {
  if (position >= seq.size()) {
    throw InvalidArgument("mutate: position " + std::to_string(position) +
                          " out of range for length " + std::to_string(seq.size()));
  }
  if (!isCanonical(to)) throw InvalidArgument("mutate: non-canonical residue");
  std::string s = seq.str();
  s[position] = to;
  return Sequence(std::move(s));
}

struct Mutation {
  std::size_t position = 0;
  char from = 'A';
  char to = 'A';

  friend bool operator==(const Mutation&, const Mutation&) = default;
};

/// Substitutions that turn the parental sequence into one variant. Entries are
/// kept sorted by position.
class MutationSet {
 public:
  MutationSet() = default;

  MutationSet(Sequence parental, std::vector<Mutation> entries)
      : parental_(std::move(parental)), entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const Mutation& a, const Mutation& b) { return a.position < b.position; });
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const Mutation& m = entries_[k];
      if (m.position >= parental_.size()) throw InvalidArgument("mutation position out of range");
      if (k > 0 && entries_[k - 1].position == m.position) {
        throw InvalidArgument("duplicate mutation position " + std::to_string(m.position));
      }
      if (parental_[m.position] != m.from) {
        throw InvalidArgument("mutation 'from' residue does not match parental at position " +
                              std::to_string(m.position));
      }
      if (!isCanonical(m.to) || m.to == m.from) {
        throw InvalidArgument("invalid mutation target at position " +
                              std::to_string(m.position));
      }
    }
  }

  const Sequence& parental() const noexcept { return parental_; }
  const std::vector<Mutation>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  Sequence apply() const {
    std::string s = parental_.str();
    for (const auto& m : entries_) s[m.position] = m.to;
    return Sequence(std::move(s));
  }

  friend bool operator==(const MutationSet&, const MutationSet&) = default;

 private:
  Sequence parental_;
  std::vector<Mutation> entries_;
};

inline MutationSet diff(const Sequence& parental, const Sequence& variant) {
  if (parental.size() != variant.size()) {
    throw InvalidArgument("diff: length mismatch (" + std::to_string(parental.size()) + " vs " +
                          std::to_string(variant.size()) + ")");
  }
  std::vector<Mutation> entries;
  for (std::size_t i = 0; i < parental.size(); ++i) {
    if (parental[i] != variant[i]) entries.push_back({i, parental[i], variant[i]});
  }
  return MutationSet(parental, std::move(entries));
}

/// Square integer substitution matrix in NCBI text layout. May include
/// non-canonical codes (B, Z, X, *); those are ignored by encodings.
struct SubstitutionMatrix {
  std::string codes;
  std::vector<std::vector<double>> scores;

  double score(char a, char b) const {
    auto i = codes.find(a), j = codes.find(b);
    if (i == std::string::npos || j == std::string::npos) {
      throw InvalidArgument("substitution matrix has no entry for " + std::string{a, b});
    }
    return scores[i][j];
  }

  bool isSymmetric() const {
    for (std::size_t i = 0; i < codes.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (scores[i][j] != scores[j][i]) return false;
    return true;
  }
};

inline SubstitutionMatrix parseSubstitutionMatrix(std::istream& in) {
  SubstitutionMatrix m;
  std::string line;
  bool haveHeader = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (!haveHeader) {
      std::string tok;
      while (ls >> tok) {
        if (tok.size() != 1) throw FixtureError("substitution matrix header token '" + tok + "'");
        m.codes.push_back(tok[0]);
      }
      haveHeader = true;
      continue;
    }
    std::string label;
    ls >> label;
    if (label.size() != 1) throw FixtureError("substitution matrix row label '" + label + "'");
    const std::size_t row = m.scores.size();
    if (row >= m.codes.size() || m.codes[row] != label[0]) {
      throw FixtureError("substitution matrix row '" + label + "' out of header order");
    }
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (!ls.eof()) throw FixtureError("substitution matrix row '" + label + "' has a bad value");
    if (values.size() != m.codes.size()) {
      throw FixtureError("substitution matrix row '" + label + "' has " +
                         std::to_string(values.size()) + " values, expected " +
                         std::to_string(m.codes.size()));
    }
    m.scores.push_back(std::move(values));
  }
  if (!haveHeader || m.scores.size() != m.codes.size()) {
    throw FixtureError("substitution matrix is not square");
  }
  return m;
}

inline SubstitutionMatrix loadSubstitutionMatrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FixtureError("cannot open substitution matrix '" + path + "'");
  return parseSubstitutionMatrix(in);
}

/// Location of the bundled BLOSUM62 file; `ABBO_DATA_DIR` in the environment
/// overrides the compiled-in data directory.
inline std::string defaultBlosum62Path() {
  if (const char* dir = std::getenv("ABBO_DATA_DIR"); dir && *dir) {
    return std::string(dir) + "/BLOSUM62";
  }
  return std::string(ABBO_DATA_DIR) + "/BLOSUM62";
}

/// Per-residue feature rows, one per canonical residue.
class EncodingMatrix {
 public:
  EncodingMatrix(std::string name, std::array<std::vector<double>, kAlphabetSize> rows)
      : name_(std::move(name)), rows_(std::move(rows)) {
    dim_ = rows_[0].size();
    for (const auto& r : rows_) {
      if (r.size() != dim_) throw InvalidArgument("encoding rows differ in dimension");
    }
  }

  static EncodingMatrix oneHot() {
    std::array<std::vector<double>, kAlphabetSize> rows;
    for (std::size_t a = 0; a < kAlphabetSize; ++a) {
      rows[a].assign(kAlphabetSize, 0.0);
      rows[a][a] = 1.0;
    }
    return EncodingMatrix("onehot", std::move(rows));
  }

  /// Raw matrix rows restricted to the canonical residues, in kAlphabet order.
  static EncodingMatrix fromSubstitutionMatrix(std::string name, const SubstitutionMatrix& m) {
    std::array<std::vector<double>, kAlphabetSize> rows;
    for (std::size_t a = 0; a < kAlphabetSize; ++a) {
      rows[a].resize(kAlphabetSize);
      for (std::size_t b = 0; b < kAlphabetSize; ++b) {
        rows[a][b] = m.score(kAlphabet[a], kAlphabet[b]);
      }
    }
    for (std::size_t a = 0; a < kAlphabetSize; ++a)
      for (std::size_t b = 0; b < a; ++b)
        if (rows[a][b] != rows[b][a]) {
          throw FixtureError("substitution matrix '" + name + "' is not symmetric at " +
                             std::string{kAlphabet[a], kAlphabet[b]});
        }
    return EncodingMatrix(std::move(name), std::move(rows));
  }

  static EncodingMatrix blosum62(const std::string& path = defaultBlosum62Path()) {
    return fromSubstitutionMatrix("blosum62", loadSubstitutionMatrix(path));
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<double>& row(char residue) const {
    const int idx = residueIndex(residue);
    if (idx < 0) throw InvalidArgument("encoding: unknown residue '" + std::string(1, residue) + "'");
    return rows_[static_cast<std::size_t>(idx)];
  }
  const std::vector<double>& row(std::size_t index) const { return rows_.at(index); }

 private:
  std::string name_;
  std::array<std::vector<double>, kAlphabetSize> rows_;
  std::size_t dim_ = 0;
};

/// Concatenation of per-position encoding rows; length size()·dim().
inline Eigen::VectorXd encode(const Sequence& seq, const EncodingMatrix& enc) {
  const std::size_t d = enc.dim();
  Eigen::VectorXd out(static_cast<Eigen::Index>(seq.size() * d));
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto& r = enc.row(seq[i]);
    for (std::size_t k = 0; k < d; ++k) out[static_cast<Eigen::Index>(i * d + k)] = r[k];
  }
  return out;
}

struct NamedSequence {
  std::string id;
  Sequence sequence;
};

/// One sequence per line, optionally `id<TAB>sequence`. Blank lines and lines
/// starting with '#' are skipped; unnamed entries get their line number as id.
inline std::vector<NamedSequence> readSequenceList(std::istream& in) {
  std::vector<NamedSequence> out;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string id = std::to_string(lineNo), seq = line;
    if (auto tab = line.find('\t'); tab != std::string::npos) {
      id = line.substr(0, tab);
      seq = line.substr(tab + 1);
    }
    try {
      out.push_back({id, Sequence(seq)});
    } catch (const InvalidArgument& e) {
      throw FixtureError("sequence list line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  if (!out.empty()) {
    for (const auto& s : out) {
      if (s.sequence.size() != out.front().sequence.size()) {
        throw FixtureError("sequence list mixes lengths (" + s.id + ")");
      }
    }
  }
  return out;
}

inline std::vector<NamedSequence> readSequenceList(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FixtureError("cannot open sequence list '" + path + "'");
  return readSequenceList(in);
}

}  // namespace abbo
