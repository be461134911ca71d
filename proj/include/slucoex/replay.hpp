#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "slucoex/rng.hpp"

namespace slucoex::rl {

// Fixed-capacity ring with strict FIFO eviction.
template <typename T>
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0)
            throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
        data_.reserve(capacity_);
    }

    void push(T item) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(item));
        } else {
            data_[head_] = std::move(item);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return data_.empty(); }

    // logical index 0 = oldest surviving entry
    const T& at(std::size_t i) const {
        return data_[(head_ + i) % data_.size()];
    }

    const T& sample_one(Rng& rng) const {
        return data_[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(data_.size()) - 1))];
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0; // oldest element once the ring is full
    std::vector<T> data_;
};

} // namespace slucoex::rl
