// Regenerates the committed end-to-end fixture: 30 PGM frames of two
// synthetic walkers crossing the x=160 counting line left to right.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "crowdlens/image.hpp"
#include "synthetic.hpp"

using namespace crowdlens;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_walker_fixture <output-dir>\n");
    return 2;
  }
  const std::filesystem::path dir(argv[1]);
  std::filesystem::create_directories(dir);
  for (int i = 0; i < synth::WalkerScript::kFrameCount; ++i) {
    const GrayImage frame = synth::walker_frame(i);
    PixelBuffer buf;
    buf.width = frame.width;
    buf.height = frame.height;
    buf.channels = 1;
    buf.data = frame.luma;
    const auto bytes = encode_pnm(buf);
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03d.pgm", i);
    std::ofstream out(dir / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    if (!out.flush()) {
      std::fprintf(stderr, "write failed: %s\n", (dir / name).c_str());
      return 1;
    }
  }
  std::printf("wrote %d frames to %s\n", synth::WalkerScript::kFrameCount, dir.c_str());
  return 0;
}
