lemma SubsetTrans(A: set<int>, B: set<int>, C: set<int>)
  requires A <= B && B <= C
  ensures A <= C
{
  forall x | x in A
    ensures x in C
  {
    calc ==> {
      x in A;
      x in B;
      { assert B <= C; }
      x in C;
    }
  }
}
