#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

namespace navgym {

/// Multi-producer multi-consumer FIFO with a fixed capacity. Producers block
/// while it is full; close() wakes everyone and lets consumers drain.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("queue capacity must be >= 1");
  }

  BoundedQueue(const BoundedQueue&) = delete;
  BoundedQueue& operator=(const BoundedQueue&) = delete;

  /// Returns false if the queue was closed before the item could be added.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    ++pushed_;
    lock.unlock();
    not_empty_.notify_one();
    return true;
  }

  /// Blocks for one item; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    ++popped_;
    lock.unlock();
    not_full_.notify_one();
    return item;
  }

  /// Blocks for the first item, then keeps collecting until `max_items` are
  /// gathered or `straggler_wait` has passed since the first one. Returns the
  /// number appended to `out`; zero means closed and drained.
  std::size_t pop_batch(std::vector<T>& out, std::size_t max_items, std::chrono::microseconds straggler_wait) {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return 0;
    const auto deadline = std::chrono::steady_clock::now() + straggler_wait;
    std::size_t taken = 0;
    while (true) {
      while (!items_.empty() && taken < max_items) {
        out.push_back(std::move(items_.front()));
        items_.pop_front();
        ++taken;
        ++popped_;
      }
      not_full_.notify_all();
      if (taken >= max_items || closed_) break;
      if (!not_empty_.wait_until(lock, deadline, [&] { return closed_ || !items_.empty(); })) break;
    }
    return taken;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t pushed() const {
    std::lock_guard lock(mu_);
    return pushed_;
  }
  std::uint64_t popped() const {
    std::lock_guard lock(mu_);
    return popped_;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
  std::uint64_t pushed_ = 0;
  std::uint64_t popped_ = 0;
};

/// Single-value mailbox used to hand a reply back to one waiting worker.
template <class T>
class ReplySlot {
 public:
  void put(T value) {
    {
      std::lock_guard lock(mu_);
      value_ = std::move(value);
    }
    cv_.notify_one();
  }

  /// Blocks until a value arrives; nullopt if the slot was closed.
  std::optional<T> take() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || value_.has_value(); });
    if (!value_) return std::nullopt;
    std::optional<T> out = std::move(value_);
    value_.reset();
    return out;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::optional<T> value_;
  bool closed_ = false;
};

/// Reader/writer lock that prefers writers, so a steady stream of readers
/// cannot starve an update. Meets the SharedMutex requirements.
class WriterPreferringLock {
 public:
  void lock_shared() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !writer_ && waiting_writers_ == 0; });
    ++readers_;
  }
  void unlock_shared() {
    std::lock_guard lock(mu_);
    if (--readers_ == 0) cv_.notify_all();
  }
  void lock() {
    std::unique_lock lock(mu_);
    ++waiting_writers_;
    cv_.wait(lock, [&] { return !writer_ && readers_ == 0; });
    --waiting_writers_;
    writer_ = true;
  }
  void unlock() {
    {
      std::lock_guard lock(mu_);
      writer_ = false;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int readers_ = 0;
  int waiting_writers_ = 0;
  bool writer_ = false;
};

}  // namespace navgym
