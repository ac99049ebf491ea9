// libFuzzer entry point for the CAN reassembly engine.
//
//   CC=clang CXX=clang++ cmake -B build-fuzz -DCSPSTACK_BUILD_FUZZER=ON -DCSPSTACK_BUILD_TESTS=OFF
//   cmake --build build-fuzz --target fuzz_can_rx
//   ./build-fuzz/tools/fuzz_can_rx fuzz-work/ corpus/

#include <cstddef>
#include <cstdint>

#include "cspstack/fuzz.hpp"

extern "C" int LLVMFuzzerTestOneInput(const uint8_t* data, size_t size) {
    static const cspstack::Config cfg{};
    const auto report = cspstack::fuzz::run_fuzz_case({data, size}, cfg);
    if (report.leaked != 0 || report.divergence) {
        __builtin_trap();
    }
    return 0;
}
