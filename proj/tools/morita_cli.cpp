#include <cstdio>

int main() {
  // placeholder until the scenario pipeline lands
  std::puts("morita cli: not wired up yet");
  return 2;
}
