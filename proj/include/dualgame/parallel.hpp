#ifndef DUALGAME_PARALLEL_HPP
#define DUALGAME_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dualgame {

/// Runs fn(0) .. fn(n-1) on up to `threads` workers. Each index writes its own output slot, so
/// results do not depend on scheduling. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn)
{
   if(threads <= 1 || n <= 1) {
      for(std::size_t i = 0; i < n; ++i)
         fn(i);
      return;
   }
   std::atomic<std::size_t> next{0};
   std::exception_ptr error;
   std::mutex error_mutex;
   auto worker = [&] {
      while(true) {
         const std::size_t i = next.fetch_add(1);
         if(i >= n)
            return;
         try {
            fn(i);
         } catch(...) {
            std::lock_guard lock(error_mutex);
            if(!error)
               error = std::current_exception();
            next = n;
         }
      }
   };
   std::vector<std::thread> pool;
   const std::size_t count = std::min(threads, n);
   for(std::size_t t = 0; t < count; ++t)
      pool.emplace_back(worker);
   for(auto& t : pool)
      t.join();
   if(error)
      std::rethrow_exception(error);
}

}  // namespace dualgame

#endif  // DUALGAME_PARALLEL_HPP
