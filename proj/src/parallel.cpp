#include "gelfand/parallel.hpp"

#include <cstdlib>
#include <string>

namespace gelfand {

int worker_count() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("GELFAND_THREADS")) {
        try {
            int cap = std::stoi(env);
            if (cap >= 1) hw = std::min(hw, cap);
        } catch (...) {
            // unparsable cap: ignore
        }
    }
    return hw;
}

}  // namespace gelfand
