#include "kcs/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kcs/errors.hpp"

namespace kcs::kernels {

#ifndef KCS_WITH_AVX2
const Backend* avx2_backend() { return nullptr; }
#endif

namespace {

const Backend* pick_initial() {
    if (const char* env = std::getenv("KCS_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_backend();
        if (std::strcmp(env, "avx2") == 0 && avx2_backend()) return avx2_backend();
        // Unknown or unsupported request in the environment falls back to
        // autodetection rather than aborting a batch job.
    }
    if (const Backend* b = avx2_backend()) return b;
    return &scalar_backend();
}

const Backend*& slot() {
    static const Backend* current = pick_initial();
    return current;
}

} // namespace

const Backend& active() { return *slot(); }

void force_backend(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        slot() = &scalar_backend();
        return;
    }
    if (std::strcmp(name, "avx2") == 0) {
        if (const Backend* b = avx2_backend()) {
            slot() = b;
            return;
        }
        throw ConfigError("kernel backend 'avx2' not supported on this CPU");
    }
    throw ConfigError(std::string("unknown kernel backend '") + name + "'");
}

} // namespace kcs::kernels
