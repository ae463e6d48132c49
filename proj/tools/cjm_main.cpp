#include <cstdio>

int main() {
  std::puts("cjm: skeleton");
  return 0;
}
