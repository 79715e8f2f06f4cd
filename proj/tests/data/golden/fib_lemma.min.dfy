function Fib(n: nat): nat
{
  if n < 2 then n
  else Fib(n - 2) + Fib(n - 1)
}

lemma FibLemma(n: nat)
  ensures Fib(n) % 2 == 0 <==> n % 3 == 0
{
  if n < 2 {
  } else {
  }
}
