#pragma once

// Experience replay: transition tuples in a fixed-capacity ring buffer with
// oldest-first eviction, uniform with-replacement mini-batch sampling, and the
// linear epsilon schedule.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qstop/rng.hpp"

namespace qstop {

struct Experience {
  std::vector<double> state;       // encoded s
  std::vector<double> next_state;  // encoded s'; ignored when terminal
  int action = 0;
  double reward = 0.0;
  bool terminal = false;
};

struct EpsilonSchedule {
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::uint64_t decay_steps = 1;
};

// Linear interpolation from eps_start to eps_end, clamped at eps_end.
inline double epsilon_at(const EpsilonSchedule& s, std::uint64_t step) {
  if (s.decay_steps < 1) throw std::invalid_argument("epsilon_at: decay_steps must be >= 1");
  if (step >= s.decay_steps) return s.eps_end;
  const double frac = static_cast<double>(step) / static_cast<double>(s.decay_steps);
  return s.eps_start + (s.eps_end - s.eps_start) * frac;
}

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
    slots_.reserve(capacity);
  }

  void push(Experience e) {
    if (slots_.size() < capacity_) {
      slots_.push_back(std::move(e));
    } else {
      slots_[head_] = std::move(e);
      head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
  }

  std::size_t size() const { return slots_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_inserted() const { return inserted_; }

  const Experience& operator[](std::size_t i) const { return slots_[i]; }

  // Uniform i.i.d. draws with replacement from the current contents.
  std::vector<std::uint32_t> sample_indices(std::size_t batch, CounterRng& rng) const {
    if (slots_.size() < batch) {
      throw std::runtime_error("ReplayBuffer: warm-up not finished (size < batch)");
    }
    std::vector<std::uint32_t> idx(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      idx[i] = static_cast<std::uint32_t>(rng.next_below(slots_.size()));
    }
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::uint64_t inserted_ = 0;
  std::vector<Experience> slots_;
};

}  // namespace qstop
