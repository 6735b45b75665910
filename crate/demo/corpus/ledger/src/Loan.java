package ledger;

public class Loan {
    private final long principal;
    private final int months;
    private final int rate;

    public Loan(long principal, int months, int rate) {
        this.principal = principal;
        this.months = months;
        this.rate = rate;
    }

    public long monthlyPayment() {
        long interest = principal * rate / 1200;
        long base = principal / months;
        return base + interest;
    }

    public long totalPaid() {
        long payment = monthlyPayment();
        return payment * months;
    }

    public boolean isAffordable(long income) {
        long payment = monthlyPayment();
        long limit = income / 3;
        return payment < limit;
    }

    public int remainingMonths(int paid) {
        int left = months - paid;
        if (left < 0) {
            left = 0;
        }
        return left;
    }

    public long balanceAfter(int paid) {
        long base = principal / months;
        long done = base * paid;
        return principal - done;
    }
}
