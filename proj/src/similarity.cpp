#include "biossl/similarity.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <limits>

namespace biossl {

// ---- fingerprints -----------------------------------------------------------------

void Fingerprint::set(std::size_t bit) {
  if (bit >= width_) throw IndexError("fingerprint bit " + std::to_string(bit) + " >= width " + std::to_string(width_));
  words_[bit / 64] |= std::uint64_t{1} << (bit % 64);
}

bool Fingerprint::test(std::size_t bit) const {
  if (bit >= width_) throw IndexError("fingerprint bit " + std::to_string(bit) + " >= width " + std::to_string(width_));
  return (words_[bit / 64] >> (bit % 64)) & 1U;
}

std::size_t Fingerprint::popcount() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

Fingerprint Fingerprint::from_hex(std::string_view hex, std::size_t width) {
  Fingerprint fp(width);
  std::size_t bit = 0;
  for (auto it = hex.rbegin(); it != hex.rend(); ++it, bit += 4) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(*it)));
    int nibble;
    if (c >= '0' && c <= '9') nibble = c - '0';
    else if (c >= 'a' && c <= 'f') nibble = c - 'a' + 10;
    else throw InputError(std::string("invalid hex digit '") + *it + "' in fingerprint");
    for (int k = 0; k < 4; ++k) {
      if (!((nibble >> k) & 1)) continue;
      if (bit + static_cast<std::size_t>(k) >= width) {
        throw InputError("fingerprint hex sets a bit beyond width " + std::to_string(width));
      }
      fp.set(bit + static_cast<std::size_t>(k));
    }
  }
  return fp;
}

std::string Fingerprint::to_hex() const {
  const std::size_t digits = std::max<std::size_t>(1, (width_ + 3) / 4);
  std::string out(digits, '0');
  for (std::size_t d = 0; d < digits; ++d) {
    int nibble = 0;
    for (int k = 0; k < 4; ++k) {
      const std::size_t bit = d * 4 + static_cast<std::size_t>(k);
      if (bit < width_ && test(bit)) nibble |= 1 << k;
    }
    out[digits - 1 - d] = "0123456789abcdef"[nibble];
  }
  return out;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.width() != b.width()) {
    throw ShapeError("tanimoto: fingerprint widths differ (" + std::to_string(a.width()) + " vs " +
                     std::to_string(b.width()) + ")");
  }
  std::size_t both = 0;
  std::size_t either = 0;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t k = 0; k < wa.size(); ++k) {
    both += static_cast<std::size_t>(std::popcount(wa[k] & wb[k]));
    either += static_cast<std::size_t>(std::popcount(wa[k] | wb[k]));
  }
  if (either == 0) return 0.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

Fingerprint hashed_fingerprint(std::string_view smiles, std::size_t width) {
  Fingerprint fp(width);
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t k = 0; k + n <= smiles.size(); ++k) {
      const std::uint64_t h = fnv1a64(smiles.substr(k, n)) ^ (n * 0x9e3779b97f4a7c15ULL);
      fp.set(static_cast<std::size_t>(splitmix64(h) % width));
    }
  }
  return fp;
}

// ---- sequences ------------------------------------------------------------------

ProteinSequence::ProteinSequence(std::string_view residues) {
  codes_.reserve(residues.size());
  for (char raw : residues) {
    if (std::isspace(static_cast<unsigned char>(raw))) continue;
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    const auto pos = kResidueAlphabet.find(c);
    if (pos == std::string_view::npos) {
      throw InputError(std::string("residue '") + raw + "' outside the amino-acid alphabet");
    }
    codes_.push_back(static_cast<std::uint8_t>(pos));
  }
  if (codes_.empty()) throw InputError("empty protein sequence");
}

std::string ProteinSequence::str() const {
  std::string out;
  out.reserve(codes_.size());
  for (auto c : codes_) out.push_back(kResidueAlphabet[c]);
  return out;
}

ScoringScheme ScoringScheme::blosum62(int gap_open, int gap_extend) {
  // Row/column order matches kResidueAlphabet: ARNDCQEGHILKMFPSTWYVX.
  static constexpr int kBlosum62[kNumResidues][kNumResidues] = {
      {4, -1, -2, -2, 0, -1, -1, 0, -2, -1, -1, -1, -1, -2, -1, 1, 0, -3, -2, 0, 0},
      {-1, 5, 0, -2, -3, 1, 0, -2, 0, -3, -2, 2, -1, -3, -2, -1, -1, -3, -2, -3, -1},
      {-2, 0, 6, 1, -3, 0, 0, 0, 1, -3, -3, 0, -2, -3, -2, 1, 0, -4, -2, -3, -1},
      {-2, -2, 1, 6, -3, 0, 2, -1, -1, -3, -4, -1, -3, -3, -1, 0, -1, -4, -3, -3, -1},
      {0, -3, -3, -3, 9, -3, -4, -3, -3, -1, -1, -3, -1, -2, -3, -1, -1, -2, -2, -1, -2},
      {-1, 1, 0, 0, -3, 5, 2, -2, 0, -3, -2, 1, 0, -3, -1, 0, -1, -2, -1, -2, -1},
      {-1, 0, 0, 2, -4, 2, 5, -2, 0, -3, -3, 1, -2, -3, -1, 0, -1, -3, -2, -2, -1},
      {0, -2, 0, -1, -3, -2, -2, 6, -2, -4, -4, -2, -3, -3, -2, 0, -2, -2, -3, -3, -1},
      {-2, 0, 1, -1, -3, 0, 0, -2, 8, -3, -3, -1, -2, -1, -2, -1, -2, -2, 2, -3, -1},
      {-1, -3, -3, -3, -1, -3, -3, -4, -3, 4, 2, -3, 1, 0, -3, -2, -1, -3, -1, 3, -1},
      {-1, -2, -3, -4, -1, -2, -3, -4, -3, 2, 4, -2, 2, 0, -3, -2, -1, -2, -1, 1, -1},
      {-1, 2, 0, -1, -3, 1, 1, -2, -1, -3, -2, 5, -1, -3, -1, 0, -1, -3, -2, -2, -1},
      {-1, -1, -2, -3, -1, 0, -2, -3, -2, 1, 2, -1, 5, 0, -2, -1, -1, -1, -1, 1, -1},
      {-2, -3, -3, -3, -2, -3, -3, -3, -1, 0, 0, -3, 0, 6, -4, -2, -2, 1, 3, -1, -1},
      {-1, -2, -2, -1, -3, -1, -1, -2, -2, -3, -3, -1, -2, -4, 7, -1, -1, -4, -3, -2, -2},
      {1, -1, 1, 0, -1, 0, 0, 0, -1, -2, -2, 0, -1, -2, -1, 4, 1, -3, -2, -2, 0},
      {0, -1, 0, -1, -1, -1, -1, -2, -2, -1, -1, -1, -1, -2, -1, 1, 5, -2, -2, 0, 0},
      {-3, -3, -4, -4, -2, -2, -3, -2, -2, -3, -2, -3, -1, 1, -4, -3, -2, 11, 2, -3, -2},
      {-2, -2, -2, -3, -2, -1, -2, -3, 2, -1, -1, -2, -1, 3, -3, -2, -2, 2, 7, -1, -1},
      {0, -3, -3, -3, -1, -2, -2, -3, -3, 3, 1, -2, 1, -1, -2, -2, 0, -3, -1, 4, -1},
      {0, -1, -1, -1, -2, -1, -1, -1, -1, -1, -1, -1, -1, -1, -2, 0, 0, -2, -1, -1, -1},
  };
  ScoringScheme s;
  for (std::size_t r = 0; r < kNumResidues; ++r) {
    for (std::size_t c = 0; c < kNumResidues; ++c) s.matrix[r][c] = kBlosum62[r][c];
  }
  s.gap_open = gap_open;
  s.gap_extend = gap_extend;
  return s;
}

ScoringScheme ScoringScheme::match_mismatch(int match, int mismatch, int gap_open, int gap_extend) {
  ScoringScheme s;
  for (std::size_t r = 0; r < kNumResidues; ++r) {
    for (std::size_t c = 0; c < kNumResidues; ++c) s.matrix[r][c] = r == c ? match : mismatch;
  }
  s.gap_open = gap_open;
  s.gap_extend = gap_extend;
  return s;
}

std::int64_t smith_waterman(const ProteinSequence& a, const ProteinSequence& b,
                            const ScoringScheme& scoring) {
  if (a.size() == 0 || b.size() == 0) throw InputError("smith_waterman: empty sequence");
  constexpr std::int64_t kNeg = std::numeric_limits<std::int64_t>::min() / 4;
  const std::int64_t open = scoring.gap_open;
  const std::int64_t extend = scoring.gap_extend;
  const auto ac = a.codes();
  const auto bc = b.codes();
  const std::size_t m = bc.size();

  // Rolling rows. M: a_i aligned to b_j; X: a_i against a gap; Y: b_j against a gap.
  std::vector<std::int64_t> m_prev(m + 1, kNeg), x_prev(m + 1, kNeg), y_prev(m + 1, kNeg);
  std::vector<std::int64_t> m_cur(m + 1, kNeg), x_cur(m + 1, kNeg), y_cur(m + 1, kNeg);
  std::int64_t best = 0;
  for (std::size_t i = 1; i <= ac.size(); ++i) {
    m_cur[0] = x_cur[0] = y_cur[0] = kNeg;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int64_t diag = std::max({std::int64_t{0}, m_prev[j - 1], x_prev[j - 1], y_prev[j - 1]});
      m_cur[j] = diag + scoring.score(ac[i - 1], bc[j - 1]);
      x_cur[j] = std::max({m_prev[j] - open, x_prev[j] - extend, y_prev[j] - open});
      y_cur[j] = std::max({m_cur[j - 1] - open, y_cur[j - 1] - extend, x_cur[j - 1] - open});
      best = std::max(best, m_cur[j]);
    }
    std::swap(m_prev, m_cur);
    std::swap(x_prev, x_cur);
    std::swap(y_prev, y_cur);
  }
  return best;
}

double normalized_sw(std::int64_t raw, std::int64_t self_a, std::int64_t self_b) {
  if (self_a <= 0 || self_b <= 0) {
    throw InputError("normalized_sw: degenerate sequence with non-positive self-score");
  }
  const double v = static_cast<double>(raw) /
                   std::sqrt(static_cast<double>(self_a) * static_cast<double>(self_b));
  return std::clamp(v, 0.0, 1.0);
}

double normalized_sw(const ProteinSequence& a, const ProteinSequence& b, const ScoringScheme& scoring) {
  return normalized_sw(smith_waterman(a, b, scoring), smith_waterman(a, a, scoring),
                       smith_waterman(b, b, scoring));
}

// ---- ModuleSim ----------------------------------------------------------------------

const std::vector<int>& PpiProximity::distances_from(NodeIndex a) {
  auto it = cache_.find(a);
  if (it != cache_.end()) return it->second;
  auto dist = bfs_distances(*graph_, edge_type_set({EdgeType::ProteinProtein}), a);
  return cache_.emplace(a, std::move(dist)).first->second;
}

double PpiProximity::sp(NodeIndex a, NodeIndex b) {
  if (a == b) return 1.0;
  const int d = distances_from(a)[b];
  return d < 0 ? 0.0 : std::exp(-static_cast<double>(d));
}

namespace {

void check_module(const DiseaseModule& d, const HetGraph& g) {
  if (d.genes.empty()) throw InputError("modulesim: empty disease module");
  for (NodeIndex gene : d.genes) {
    if (gene >= g.num_nodes() || g.ntype(gene) != NodeType::Protein) {
      throw InputError("modulesim: module gene " + std::to_string(gene) +
                       " is not a protein node of the PPI network");
    }
  }
}

// Average over `to` of sp(g, .), summed over g in `from`.
double directed_sum(const DiseaseModule& from, const DiseaseModule& to, PpiProximity& ppi) {
  double total = 0.0;
  for (NodeIndex g : from.genes) {
    double acc = 0.0;
    for (NodeIndex h : to.genes) acc += ppi.sp(g, h);
    total += acc / static_cast<double>(to.genes.size());
  }
  return total;
}

double module_similarity(const DiseaseModule& g1, const DiseaseModule& g2, PpiProximity& ppi) {
  return (directed_sum(g1, g2, ppi) + directed_sum(g2, g1, ppi)) /
         static_cast<double>(g1.genes.size() + g2.genes.size());
}

}  // namespace

double modulesim(const DiseaseModule& d1, const DiseaseModule& d2, PpiProximity& ppi) {
  const double cross = module_similarity(d1, d2, ppi);
  const double self1 = module_similarity(d1, d1, ppi);
  const double self2 = module_similarity(d2, d2, ppi);
  return std::clamp(2.0 * cross / (self1 + self2), 0.0, 1.0);
}

double modulesim(const DiseaseModule& d1, const DiseaseModule& d2, const HetGraph& ppi) {
  check_module(d1, ppi);
  check_module(d2, ppi);
  PpiProximity prox(ppi);
  return modulesim(d1, d2, prox);
}

}  // namespace biossl
