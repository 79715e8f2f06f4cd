method Collatz(n: nat) returns (steps: nat)
  requires n > 0
  decreases *
{
  var m := n;
  steps := 0;
  while m != 1
    invariant m > 0
    decreases *
  {
    if m % 2 == 0 {
      m := m / 2;
    } else {
      m := 3 * m + 1;
    }
    steps := steps + 1;
  }
}
