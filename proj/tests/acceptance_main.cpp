#include "hest/verify.hpp"
#include "hest/report_io.hpp"
int main(){return 0;}
