#include "xbar/parallel.hpp"

#include <cstdlib>
#include <string>

namespace xbar {

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("XBAR_DSE_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (...) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace xbar
