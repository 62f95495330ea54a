#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "dapref/prefetch.hpp"

namespace dapref {

struct EvalTask {
  NodeIndex node = 0;
  ParamVector state;
  std::int64_t t = 0;
};

/// Pure function of the task. Called concurrently from several workers.
using TaskEvaluator = std::function<std::vector<double>(const EvalTask&)>;

struct WorkerPoolConfig {
  std::size_t workers = 1;
};

/// Worker count from DAPREF_WORKERS, falling back to 1.
std::size_t default_worker_count();

/// Fixed set of threads with static task assignment: task i goes to worker
/// i mod W. run() returns after every task finished (barrier), and rethrows
/// the first exception raised by a task.
class WorkerPool {
public:
  explicit WorkerPool(std::size_t workers);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const noexcept { return workers_; }
  void run(std::size_t tasks, const std::function<void(std::size_t)>& body);

private:
  void worker_loop(std::size_t id);

  std::size_t workers_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  std::uint64_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stopping_ = false;
  std::size_t task_count_ = 0;
  const std::function<void(std::size_t)>* body_ = nullptr;
  std::vector<std::exception_ptr> errors_;
};

/// Evaluates every task and assembles the result map on the calling thread.
EvaluationMap evaluate_tour(std::span<const EvalTask> tasks, const TaskEvaluator& evaluator,
                            WorkerPool& pool);
EvaluationMap evaluate_tour(std::span<const EvalTask> tasks, const TaskEvaluator& evaluator,
                            const WorkerPoolConfig& config);

/// Mean seconds per call, as the median over three groups of the per-group
/// mean. reps < 3 is raised to 3.
double wall_clock_probe(const std::function<void()>& evaluator, std::size_t reps);

} // namespace dapref
