lemma Step(n: nat)
  ensures n < n + 1
{
}

method Mixed(n: nat) returns (r: nat)
  ensures r == n
  decreases n
{
  r := 0;
  Step(n);
  assert r <= n;
  while r < n
    decreases n - r
    invariant r <= n
  {
    r := r + 1;
  }
  calc {
    r;
  ==
    n;
  }
}
