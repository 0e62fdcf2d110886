import django_filters

from .models import VerificationRun


class VerificationRunFilter(django_filters.FilterSet):
    """
    Filter for recorded runs
    """
    benchmark = django_filters.CharFilter(field_name='benchmark', lookup_expr='iexact')
    mode = django_filters.CharFilter(method='filter_mode')
    exit_code = django_filters.NumberFilter(field_name='exit_code')
    verified = django_filters.BooleanFilter(method='filter_verified')
    date_from = django_filters.DateFilter(field_name='created_at', lookup_expr='date__gte')
    date_to = django_filters.DateFilter(field_name='created_at', lookup_expr='date__lte')

    class Meta:
        model = VerificationRun
        fields = ['benchmark', 'mode', 'exit_code', 'verified', 'date_from', 'date_to']

    def filter_mode(self, queryset, name, value):
        """
        `symbolic` matches every window width
        """
        if value == 'symbolic':
            return queryset.filter(mode__startswith='symbolic(')
        return queryset.filter(mode=value)

    def filter_verified(self, queryset, name, value):
        if value is None:
            return queryset
        return queryset.filter(exit_code=0) if value else queryset.exclude(exit_code=0)
