#include "dapref/executor.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace dapref {

std::size_t default_worker_count() {
  if (const char* env = std::getenv("DAPREF_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

WorkerPool::WorkerPool(std::size_t workers) : workers_(workers), errors_(workers) {
  if (workers < 1) throw std::invalid_argument("worker pool needs at least one worker");
  if (workers_ > 1) {
    threads_.reserve(workers_);
    for (std::size_t id = 0; id < workers_; ++id) {
      threads_.emplace_back([this, id] { worker_loop(id); });
    }
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  start_cv_.notify_all();
  for (auto& th : threads_) th.join();
}

void WorkerPool::worker_loop(std::size_t id) {
  std::uint64_t seen = 0;
  while (true) {
    const std::function<void(std::size_t)>* body = nullptr;
    std::size_t count = 0;
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      body = body_;
      count = task_count_;
    }
    try {
      for (std::size_t i = id; i < count; i += workers_) (*body)(i);
    } catch (...) {
      errors_[id] = std::current_exception();
    }
    {
      std::lock_guard lock(mutex_);
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }
}

void WorkerPool::run(std::size_t tasks, const std::function<void(std::size_t)>& body) {
  if (tasks == 0) return;
  if (workers_ == 1) {
    for (std::size_t i = 0; i < tasks; ++i) body(i);
    return;
  }
  std::fill(errors_.begin(), errors_.end(), nullptr);
  {
    std::lock_guard lock(mutex_);
    body_ = &body;
    task_count_ = tasks;
    pending_ = workers_;
    ++generation_;
  }
  start_cv_.notify_all();
  {
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [&] { return pending_ == 0; });
    body_ = nullptr;
  }
  for (auto& e : errors_) {
    if (e) std::rethrow_exception(e);
  }
}

EvaluationMap evaluate_tour(std::span<const EvalTask> tasks, const TaskEvaluator& evaluator,
                            WorkerPool& pool) {
  std::vector<std::vector<double>> results(tasks.size());
  pool.run(tasks.size(), [&](std::size_t i) { results[i] = evaluator(tasks[i]); });
  EvaluationMap out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!out.emplace(tasks[i].node, std::move(results[i])).second) {
      throw std::invalid_argument("duplicate task for tour node " + to_string(tasks[i].node));
    }
  }
  return out;
}

EvaluationMap evaluate_tour(std::span<const EvalTask> tasks, const TaskEvaluator& evaluator,
                            const WorkerPoolConfig& config) {
  WorkerPool pool(config.workers);
  return evaluate_tour(tasks, evaluator, pool);
}

double wall_clock_probe(const std::function<void()>& evaluator, std::size_t reps) {
  reps = std::max<std::size_t>(reps, 3);
  using clock = std::chrono::steady_clock;
  std::array<double, 3> means{};
  for (std::size_t g = 0; g < 3; ++g) {
    const std::size_t n = reps / 3 + (g < reps % 3 ? 1 : 0);
    const auto start = clock::now();
    for (std::size_t i = 0; i < n; ++i) evaluator();
    const std::chrono::duration<double> elapsed = clock::now() - start;
    means[g] = elapsed.count() / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  return means[1];
}

} // namespace dapref
