#include <cstdio>
int main() { std::puts("pmkt"); return 0; }
