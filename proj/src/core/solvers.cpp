#include "ksatlab/solvers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "ksatlab/rng.hpp"

namespace ksat::solvers {

namespace {

using Clock = std::chrono::steady_clock;

// Literal code: 2 * (variable - 1) + negated.
inline std::uint32_t lit_code(const Literal &l) {
  return 2u * static_cast<std::uint32_t>(l.variable - 1) + (l.negated ? 1u : 0u);
}
inline bool code_negated(std::uint32_t code) { return (code & 1u) != 0; }

struct Occurrences {
  std::vector<std::vector<std::uint32_t>> clause_lits;
  std::vector<std::vector<std::uint32_t>> by_literal; // code -> clause ids

  explicit Occurrences(const CnfInstance &instance)
      : clause_lits(instance.clauses.size()),
        by_literal(2 * static_cast<std::size_t>(instance.n_vars)) {
    for (std::size_t c = 0; c < instance.clauses.size(); ++c) {
      for (const auto &lit : instance.clauses[c].literals) {
        auto code = lit_code(lit);
        clause_lits[c].push_back(code);
        by_literal[code].push_back(static_cast<std::uint32_t>(c));
      }
    }
  }
};

void verify_or_throw(const CnfInstance &instance, const SolverResult &result,
                     const char *solver) {
  if (result.status == Status::Sat &&
      (!result.assignment || !is_satisfying(instance, *result.assignment)))
    throw Error(ErrorCode::Internal,
                std::string(solver) + " produced an assignment that does not "
                                      "satisfy the formula");
}

// Clause sets are bitsets over clause ids. Each literal's occurrence set is
// stored sparsely as (word, mask) pairs so updates touch only the words that
// hold one of its clauses.
struct OccWord {
  std::uint32_t word;
  std::uint64_t mask;
};

class Dpll {
public:
  Dpll(const CnfInstance &instance, std::uint64_t budget)
      : n_vars_(static_cast<std::size_t>(instance.n_vars)), m_(instance.clauses.size()),
        words_((m_ + 63) / 64), budget_(budget), value_(n_vars_, kUnassigned),
        sat_(words_, 0), stamp_(words_, 0) {
    // Distinct literals per clause; a repeated literal counts once.
    std::size_t widest = 0;
    clause_start_.push_back(0);
    std::vector<std::vector<std::uint32_t>> by_literal(2 * n_vars_);
    for (std::size_t c = 0; c < m_; ++c) {
      const auto first = clause_lits_.size();
      for (const auto &lit : instance.clauses[c].literals) {
        const auto code = lit_code(lit);
        if (std::find(clause_lits_.begin() + static_cast<std::ptrdiff_t>(first),
                      clause_lits_.end(), code) != clause_lits_.end())
          continue;
        clause_lits_.push_back(code);
        by_literal[code].push_back(static_cast<std::uint32_t>(c));
      }
      clause_start_.push_back(static_cast<std::uint32_t>(clause_lits_.size()));
      widest = std::max(widest, clause_lits_.size() - first);
    }
    occ_start_.push_back(0);
    for (const auto &clauses : by_literal) {
      for (auto c : clauses) {
        const auto w = c / 64;
        const auto bit = std::uint64_t{1} << (c % 64);
        if (occ_start_.back() != occ_.size() && occ_.back().word == w)
          occ_.back().mask |= bit;
        else
          occ_.push_back({w, bit});
      }
      occ_start_.push_back(static_cast<std::uint32_t>(occ_.size()));
    }
    // Bit-sliced count of literals not yet assigned false, per clause.
    while ((std::size_t{1} << planes_) <= widest)
      ++planes_;
    rem_.assign(planes_ * words_, 0);
    for (std::size_t c = 0; c < m_; ++c) {
      const auto size = clause_start_[c + 1] - clause_start_[c];
      for (std::size_t p = 0; p < planes_; ++p)
        if ((size >> p) & 1u)
          rem_[p * words_ + c / 64] |= std::uint64_t{1} << (c % 64);
    }
  }

  SolverResult run() {
    SolverResult result;
    result.status = search();
    result.stats = stats_;
    if (result.status == Status::Sat) {
      Assignment a(n_vars_);
      for (std::size_t v = 0; v < n_vars_; ++v)
        a.set(static_cast<std::int32_t>(v) + 1, value_[v] == 1);
      result.assignment = std::move(a);
    }
    return result;
  }

private:
  static constexpr std::int8_t kUnassigned = -1;

  struct Decision {
    std::size_t trail_pos;
    std::size_t log_pos;
    std::size_t n_sat;
    std::uint32_t var;
    bool flipped;
  };


  std::span<const OccWord> occurrences(std::uint32_t code) const {
    return {occ_.data() + occ_start_[code], occ_.data() + occ_start_[code + 1]};
  }

  bool is_true(std::uint32_t code) const {
    auto v = value_[code >> 1];
    return v != kUnassigned && (v == 1) != code_negated(code);
  }

  void assign(std::uint32_t code) {
    value_[code >> 1] = code_negated(code) ? 0 : 1;
    trail_.push_back(code);
  }

  // Records word w of sat_ and rem_ the first time the current decision
  // level touches it. Level 0 is never undone.
  void save(std::uint32_t w) {
    if (decisions_.empty() || stamp_[w] == level_)
      return;
    stamp_[w] = level_;
    log_words_.push_back(w);
    log_values_.push_back(sat_[w]);
    for (std::size_t p = 0; p < planes_; ++p)
      log_values_.push_back(rem_[p * words_ + w]);
  }

  bool has_active(std::uint32_t code) const {
    for (const auto &o : occurrences(code))
      if (o.mask & ~sat_[o.word])
        return true;
    return false;
  }

  // First literal of clause c that is not false under value_, if it is the
  // only one and no literal is true.
  std::optional<std::uint32_t> unit_literal(std::size_t c) const {
    std::optional<std::uint32_t> unit;
    for (auto i = clause_start_[c]; i < clause_start_[c + 1]; ++i) {
      const auto l = clause_lits_[i];
      if (is_true(l))
        return std::nullopt;
      if (value_[l >> 1] == kUnassigned && !unit)
        unit = l;
    }
    return unit;
  }

  // Marks the clauses of a true literal satisfied and counts one false
  // literal in each clause of its complement. Clauses left with a single
  // unassigned literal enqueue it; clauses left with none are a conflict.
  bool process(std::uint32_t code) {
    for (const auto &o : occurrences(code)) {
      const auto fresh = o.mask & ~sat_[o.word];
      if (!fresh)
        continue;
      save(o.word);
      sat_[o.word] |= fresh;
      n_sat_ += static_cast<std::size_t>(std::popcount(fresh));
    }
    for (const auto &o : occurrences(code ^ 1u)) {
      const auto w = o.word;
      save(w);
      std::uint64_t borrow = o.mask;
      for (std::size_t p = 0; p < planes_ && borrow; ++p) {
        auto &plane = rem_[p * words_ + w];
        const auto next = borrow & ~plane;
        plane ^= borrow;
        borrow = next;
      }
      std::uint64_t zero = ~std::uint64_t{0}, one = ~std::uint64_t{0};
      for (std::size_t p = 0; p < planes_; ++p) {
        const auto plane = rem_[p * words_ + w];
        zero &= ~plane;
        one &= p == 0 ? plane : ~plane;
      }
      const auto open = o.mask & ~sat_[w];
      if (zero & open)
        return false;
      for (auto units = one & open; units; units &= units - 1) {
        const auto c = std::size_t{w} * 64 + static_cast<std::size_t>(std::countr_zero(units));
        if (auto l = unit_literal(c))
          assign(*l);
      }
    }
    return true;
  }

  bool propagate() {
    while (qhead_ < trail_.size()) {
      auto code = trail_[qhead_++];
      ++stats_.propagations;
      if (!process(code))
        return false;
    }
    return true;
  }

  void backtrack_to(const Decision &d) {
    while (log_words_.size() > d.log_pos) {
      const auto w = log_words_.back();
      const auto *saved = log_values_.data() + log_values_.size() - (planes_ + 1);
      sat_[w] = saved[0];
      for (std::size_t p = 0; p < planes_; ++p)
        rem_[p * words_ + w] = saved[p + 1];
      log_words_.pop_back();
      log_values_.resize(log_values_.size() - (planes_ + 1));
    }
    while (trail_.size() > d.trail_pos) {
      value_[trail_.back() >> 1] = kUnassigned;
      trail_.pop_back();
    }
    qhead_ = d.trail_pos;
    n_sat_ = d.n_sat;
  }

  // Chronological backtracking: undo the most recent decision whose second
  // branch is still open and take that branch.
  bool resolve_conflict() {
    while (!decisions_.empty() && decisions_.back().flipped) {
      backtrack_to(decisions_.back());
      decisions_.pop_back();
    }
    if (decisions_.empty())
      return false;
    auto &top = decisions_.back();
    backtrack_to(top);
    top.flipped = true;
    ++level_;
    assign(2u * top.var + 1u);
    return true;
  }

  bool assign_pure_literals() {
    bool any = false;
    for (std::uint32_t v = 0; v < n_vars_; ++v) {
      if (value_[v] != kUnassigned)
        continue;
      const bool pos = has_active(2 * v), neg = has_active(2 * v + 1);
      if (pos != neg) {
        assign(pos ? 2 * v : 2 * v + 1);
        any = true;
      }
    }
    return any;
  }

  Status search() {
    for (std::size_t c = 0; c < m_; ++c) {
      if (clause_start_[c + 1] - clause_start_[c] != 1)
        continue;
      const auto l = clause_lits_[clause_start_[c]];
      if (is_true(l))
        continue;
      if (value_[l >> 1] != kUnassigned) {
        ++stats_.conflicts;
        return Status::Unsat;
      }
      assign(l);
    }

    for (;;) {
      if (!propagate()) {
        ++stats_.conflicts;
        if (!resolve_conflict())
          return Status::Unsat;
        continue;
      }
      if (n_sat_ == m_)
        return Status::Sat;
      if (assign_pure_literals())
        continue;

      std::optional<std::uint32_t> branch;
      for (std::uint32_t v = 0; v < n_vars_ && !branch; ++v)
        if (value_[v] == kUnassigned && (has_active(2 * v) || has_active(2 * v + 1)))
          branch = v;
      if (!branch)
        throw Error(ErrorCode::Internal, "DPLL found no branching variable");
      if (stats_.decisions >= budget_)
        return Status::Unknown;
      ++stats_.decisions;
      decisions_.push_back(Decision{trail_.size(), log_words_.size(), n_sat_, *branch, false});
      ++level_;
      assign(2u * *branch);
    }
  }

  std::size_t n_vars_;
  std::size_t m_;
  std::size_t words_;
  std::uint64_t budget_;
  std::vector<std::uint32_t> clause_start_;
  std::vector<std::uint32_t> clause_lits_;
  std::vector<std::uint32_t> occ_start_;
  std::vector<OccWord> occ_;
  std::size_t planes_ = 1;
  std::vector<std::int8_t> value_;
  std::vector<std::uint64_t> sat_;
  std::vector<std::uint64_t> rem_; // planes_ x words_
  std::size_t n_sat_ = 0;
  std::vector<std::uint32_t> trail_;
  std::size_t qhead_ = 0;
  std::vector<std::uint32_t> log_words_;
  std::vector<std::uint64_t> log_values_; // per entry: sat word, then planes
  std::vector<std::uint64_t> stamp_;      // level that last saved each word
  std::uint64_t level_ = 0;
  std::vector<Decision> decisions_;
  SolverStats stats_;
};

} // namespace

std::string_view to_string(Status status) {
  switch (status) {
  case Status::Sat:
    return "SAT";
  case Status::Unsat:
    return "UNSAT";
  case Status::Unknown:
    return "UNKNOWN";
  }
  return "UNKNOWN";
}

SolverResult solve_brute_force(const CnfInstance &instance) {
  instance.validate();
  if (instance.n_vars > kBruteForceMaxVars)
    throw Error(ErrorCode::InvalidArgument,
                "brute force is limited to N <= " +
                    std::to_string(kBruteForceMaxVars) + " variables");
  const auto start = Clock::now();
  const auto n = static_cast<std::uint32_t>(instance.n_vars);

  // Variable v lives at bit (N - v), so counting upwards walks the bit string
  // in lexicographic order.
  struct Masks {
    std::uint32_t pos = 0, neg = 0;
  };
  std::vector<Masks> masks;
  masks.reserve(instance.clauses.size());
  for (const auto &clause : instance.clauses) {
    Masks m;
    for (const auto &lit : clause.literals) {
      auto bit = 1u << (n - static_cast<std::uint32_t>(lit.variable));
      (lit.negated ? m.neg : m.pos) |= bit;
    }
    masks.push_back(m);
  }

  SolverResult result;
  result.status = Status::Unsat;
  const std::uint64_t total = 1ull << n;
  for (std::uint64_t x = 0; x < total; ++x) {
    ++result.stats.evaluated;
    const auto bits = static_cast<std::uint32_t>(x);
    bool all = true;
    for (const auto &m : masks) {
      if (((bits & m.pos) | (~bits & m.neg)) == 0) {
        all = false;
        break;
      }
    }
    if (all) {
      Assignment a(instance.n_vars);
      for (std::int32_t v = 1; v <= instance.n_vars; ++v)
        a.set(v, (bits >> (n - static_cast<std::uint32_t>(v))) & 1u);
      result.status = Status::Sat;
      result.assignment = std::move(a);
      break;
    }
  }
  result.elapsed = Clock::now() - start;
  verify_or_throw(instance, result, "brute force");
  return result;
}

SolverResult solve_dpll(const CnfInstance &instance,
                        std::uint64_t max_decisions) {
  instance.validate();
  const auto start = Clock::now();
  auto result = Dpll(instance, max_decisions).run();
  result.elapsed = Clock::now() - start;
  verify_or_throw(instance, result, "DPLL");
  return result;
}

WalkSatParams WalkSatParams::resolved(const CnfInstance &instance) const {
  if (!(noise >= 0.0 && noise <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "walksat noise must lie in [0, 1]");
  if (max_tries < 1)
    throw Error(ErrorCode::InvalidArgument, "walksat max_tries must be >= 1");
  WalkSatParams out = *this;
  if (out.max_flips == 0) {
    auto density = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::ceil(instance.alpha())));
    out.max_flips = std::max<std::uint64_t>(
        1, 100 * static_cast<std::uint64_t>(instance.n_vars) * density);
  }
  return out;
}

SolverResult solve_walksat(const CnfInstance &instance,
                           const WalkSatParams &raw_params) {
  instance.validate();
  if (instance.clauses.empty())
    throw Error(ErrorCode::UndefinedInput, "walksat needs at least one clause");
  const auto params = raw_params.resolved(instance);
  const auto start = Clock::now();

  Occurrences occ(instance);
  const auto m = instance.clauses.size();
  const auto n = static_cast<std::size_t>(instance.n_vars);
  Rng rng(params.seed);

  std::vector<std::uint8_t> value(n);
  std::vector<std::uint32_t> true_count(m);
  std::vector<std::uint32_t> unsat;
  std::vector<std::size_t> unsat_pos(m);
  unsat.reserve(m);

  auto true_lit = [&](std::size_t v) {
    return static_cast<std::uint32_t>(2 * v + (value[v] ? 0 : 1));
  };
  auto add_unsat = [&](std::uint32_t c) {
    unsat_pos[c] = unsat.size();
    unsat.push_back(c);
  };
  auto remove_unsat = [&](std::uint32_t c) {
    auto last = unsat.back();
    unsat[unsat_pos[c]] = last;
    unsat_pos[last] = unsat_pos[c];
    unsat.pop_back();
  };
  auto break_count = [&](std::size_t v) {
    std::uint32_t b = 0;
    for (auto c : occ.by_literal[true_lit(v)])
      b += true_count[c] == 1 ? 1 : 0;
    return b;
  };
  auto flip = [&](std::size_t v) {
    auto was_true = true_lit(v);
    value[v] ^= 1;
    for (auto c : occ.by_literal[was_true])
      if (--true_count[c] == 0)
        add_unsat(c);
    for (auto c : occ.by_literal[was_true ^ 1u])
      if (true_count[c]++ == 0)
        remove_unsat(c);
  };

  SolverResult result;
  std::vector<std::size_t> best;
  for (std::uint64_t attempt = 0; attempt < params.max_tries; ++attempt) {
    ++result.stats.tries;
    for (auto &v : value)
      v = rng.coin() ? 1 : 0;
    unsat.clear();
    for (std::size_t c = 0; c < m; ++c) {
      std::uint32_t t = 0;
      for (auto code : occ.clause_lits[c])
        t += (value[code >> 1] == 1) != code_negated(code) ? 1 : 0;
      true_count[c] = t;
      if (t == 0)
        add_unsat(static_cast<std::uint32_t>(c));
    }

    for (std::uint64_t step = 0;; ++step) {
      if (unsat.empty()) {
        Assignment a(instance.n_vars);
        for (std::size_t v = 0; v < n; ++v)
          a.set(static_cast<std::int32_t>(v + 1), value[v] != 0);
        result.status = Status::Sat;
        result.assignment = std::move(a);
        result.elapsed = Clock::now() - start;
        verify_or_throw(instance, result, "WalkSAT");
        return result;
      }
      if (step == params.max_flips)
        break;
      const auto &lits = occ.clause_lits[unsat[rng.below(unsat.size())]];
      std::size_t pick;
      if (rng.unit() < params.noise) {
        pick = lits[rng.below(lits.size())] >> 1;
      } else {
        std::uint32_t best_break = UINT32_MAX;
        best.clear();
        for (auto code : lits) {
          auto v = static_cast<std::size_t>(code >> 1);
          auto b = break_count(v);
          if (b < best_break) {
            best_break = b;
            best.assign(1, v);
          } else if (b == best_break) {
            best.push_back(v);
          }
        }
        pick = best[rng.below(best.size())];
      }
      flip(pick);
      ++result.stats.flips;
    }
  }
  result.status = Status::Unknown;
  result.elapsed = Clock::now() - start;
  return result;
}

Assignment random_oracle(const CnfInstance &instance, std::uint64_t seed) {
  Rng rng(seed);
  Assignment a(static_cast<std::size_t>(std::max(instance.n_vars, 0)));
  std::uint64_t word = 0;
  for (std::int32_t v = 1; v <= instance.n_vars; ++v) {
    if ((v - 1) % 64 == 0)
      word = rng.next();
    a.set(v, (word >> ((v - 1) % 64)) & 1u);
  }
  return a;
}

} // namespace ksat::solvers
