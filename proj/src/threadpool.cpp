#include "rseed/threadpool.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

namespace rseed {

int max_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("RSEED_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? static_cast<int>(hw) : 1;
    }();
    return cached;
}

namespace {

class Pool {
public:
    static Pool& instance() {
        static Pool p;
        return p;
    }

    void submit(std::function<void()> task) {
        {
            std::lock_guard<std::mutex> lk(mu_);
            ensure_workers();
            queue_.push_back(std::move(task));
        }
        cv_.notify_one();
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

private:
    void ensure_workers() {
        if (!workers_.empty()) return;
        int n = max_threads() - 1;
        for (int i = 0; i < n; ++i) {
            workers_.emplace_back([this] {
                for (;;) {
                    std::function<void()> task;
                    {
                        std::unique_lock<std::mutex> lk(mu_);
                        cv_.wait(lk, [this] { return stop_ || !queue_.empty(); });
                        if (stop_ && queue_.empty()) return;
                        task = std::move(queue_.front());
                        queue_.pop_front();
                    }
                    task();
                }
            });
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> queue_;
    std::vector<std::thread> workers_;
    bool stop_ = false;
};

} // namespace

void parallel_for(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    int nt = std::min(max_threads(), n);
    if (nt <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }

    struct Ctx {
        std::atomic<int> next{0};
        std::atomic<int> live{0};
        std::mutex mu;
        std::condition_variable done;
    } ctx;

    auto drain = [&ctx, &fn, n] {
        for (;;) {
            int i = ctx.next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) break;
            fn(i);
        }
    };

    int helpers = nt - 1;
    ctx.live.store(helpers);
    for (int h = 0; h < helpers; ++h) {
        Pool::instance().submit([&ctx, &drain] {
            drain();
            if (ctx.live.fetch_sub(1) == 1) {
                std::lock_guard<std::mutex> lk(ctx.mu);
                ctx.done.notify_one();
            }
        });
    }
    drain();
    std::unique_lock<std::mutex> lk(ctx.mu);
    ctx.done.wait(lk, [&ctx] { return ctx.live.load() == 0; });
}

} // namespace rseed
